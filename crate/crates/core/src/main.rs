fn main() {
    std::process::exit(ness_chain::cli::run());
}
