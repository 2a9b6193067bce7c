fn main() {
    std::process::exit(bdris::cli::main_entry());
}
