fn main() {
    std::process::exit(mdiew::cli::main_entry());
}
