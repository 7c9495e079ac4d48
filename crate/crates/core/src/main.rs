fn main() {
    std::process::exit(boxlens::cli::main());
}
