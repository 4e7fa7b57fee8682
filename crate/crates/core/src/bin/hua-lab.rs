fn main() {
    std::process::exit(hua_lab::cli::main());
}
