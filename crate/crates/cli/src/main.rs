use std::process::ExitCode;

fn main() -> ExitCode {
    let result = kucbvi_cli::parse_and_validate(std::env::args_os()).and_then(|inv| kucbvi_cli::execute(&inv));
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
