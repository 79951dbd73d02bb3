fn main() {
    std::process::exit(ncdk::cli::run(std::env::args().collect()));
}
