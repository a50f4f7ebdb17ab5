use std::process::ExitCode;

fn main() -> ExitCode {
    let code = match pargrid_cli::parse_args(std::env::args_os()) {
        Ok(spec) => pargrid_cli::run(&spec),
        Err(e) => {
            if e.code == pargrid_cli::EXIT_OK {
                print!("{}", e.message);
            } else {
                eprint!("{}", e.message);
                if !e.message.ends_with('\n') {
                    eprintln!();
                }
            }
            e.code
        }
    };
    ExitCode::from(code as u8)
}
