fn main() {
    std::process::exit(lmcf::cli::run(std::env::args_os()));
}
