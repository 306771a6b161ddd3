fn main() {
    std::process::exit(metricfit::cli::run(std::env::args_os()));
}
