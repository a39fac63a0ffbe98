fn main() {
    std::process::exit(paravec::cli::run(std::env::args().collect()));
}
