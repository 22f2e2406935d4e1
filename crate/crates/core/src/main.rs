fn main() {
    std::process::exit(subgroup_audit::cli::run(std::env::args_os()));
}
