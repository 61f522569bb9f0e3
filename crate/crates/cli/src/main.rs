fn main() {
    std::process::exit(cohortflow_cli::run(std::env::args_os()));
}
