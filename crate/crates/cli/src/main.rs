use ridgeline_cli::{invoke, Invocation};

fn main() {
    match invoke(std::env::args_os()) {
        Ok(Invocation::Info(text)) => print!("{text}"),
        Ok(Invocation::Done(status)) => eprintln!("{status}"),
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
