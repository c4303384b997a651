use clap::Parser;
use junctionlab_cli::{configure_threads, run, Cli};

fn main() {
    // clap exits with 2 on usage errors, matching the contract
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(stdout) => print!("{stdout}"),
        Err(e) => {
            eprintln!("junctionlab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
