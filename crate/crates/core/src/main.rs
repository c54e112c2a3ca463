fn main() {
    std::process::exit(dbm_lab::cli::main_with_args(std::env::args_os()));
}
