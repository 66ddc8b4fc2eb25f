fn main() {
    std::process::exit(sgqt::cli::main());
}
