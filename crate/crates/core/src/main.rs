fn main() {
    std::process::exit(totpos::cli::main_with_args(std::env::args()));
}
