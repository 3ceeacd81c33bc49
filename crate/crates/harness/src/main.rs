fn main() {
    std::process::exit(augnewton_harness::cli::main_with_args(std::env::args_os()));
}
