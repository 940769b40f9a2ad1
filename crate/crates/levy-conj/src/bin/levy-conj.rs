fn main() {
    std::process::exit(levy_conj::cli::run(std::env::args()));
}
