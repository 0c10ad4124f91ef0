use clap::Parser;
use entropic_hedge_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ENTROPIC_HEDGE_LOG", "error")).init();
    let cli = Cli::parse();
    std::process::exit(run(&cli));
}
