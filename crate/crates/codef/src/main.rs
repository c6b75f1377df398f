fn main() {
    std::process::exit(codef::cli::main());
}
