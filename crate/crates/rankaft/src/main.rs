fn main() {
    std::process::exit(rankaft::cli::run());
}
