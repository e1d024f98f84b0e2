fn main() {
    std::process::exit(nkflow_cli::main_with_args(std::env::args()));
}
