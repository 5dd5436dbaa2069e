fn main() {
    std::process::exit(capdetect::harness::cli::run(std::env::args()));
}
