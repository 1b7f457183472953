fn main() {
    std::process::exit(lapdae::cli::main())
}
