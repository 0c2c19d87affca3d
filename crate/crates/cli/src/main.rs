fn main() {
    std::process::exit(steinhaus_cli::main_with(std::env::args()));
}
