use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Some(n) = csp_bench::thread_cap() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let cli = csp_bench::cli::Cli::parse();
    if let Err(e) = csp_bench::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
