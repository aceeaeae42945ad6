fn main() {
    std::process::exit(ymsim::run(std::env::args_os()));
}
