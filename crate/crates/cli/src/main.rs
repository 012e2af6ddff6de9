fn main() {
    std::process::exit(basislab_cli::run());
}
