fn main() {
    std::process::exit(hypervis_cli::main_entry());
}
