fn main() {
    std::process::exit(mdls::cli::run());
}
