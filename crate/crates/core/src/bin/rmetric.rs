fn main() {
    std::process::exit(rmetric::cli::main(std::env::args_os()));
}
