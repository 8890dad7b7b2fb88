fn main() {
    std::process::exit(relq::cli::run());
}
