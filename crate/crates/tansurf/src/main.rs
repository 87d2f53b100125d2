fn main() {
    std::process::exit(tansurf::cli::run(std::env::args().skip(1)));
}
