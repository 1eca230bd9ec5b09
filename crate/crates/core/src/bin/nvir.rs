fn main() {
    std::process::exit(nvir_core::cli::run(std::env::args_os()));
}
