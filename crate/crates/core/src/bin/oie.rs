fn main() {
    std::process::exit(oie_core::cli::main_with(std::env::args().collect()));
}
