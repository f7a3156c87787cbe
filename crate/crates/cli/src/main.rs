use std::process::ExitCode;

use afdi_sim::{run, Cli, Outcome};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("AFDI_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Uncertified) => {
            eprintln!("afdi: separation is not certified (pass --allow-uncertified to accept it)");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("afdi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
