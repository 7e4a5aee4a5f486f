fn main() {
    std::process::exit(seqcloseness::cli::run_with_args(std::env::args_os()));
}
