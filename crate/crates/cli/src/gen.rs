use std::path::Path;
use std::str::FromStr;

use gnet_core::data::{fm_sine_series, gen_task, window_series, write_csv};

use crate::config::TaskSpec;
use crate::error::{CliError, CliResult};
use crate::output::emit;

/// `xor`, `parity:N`, `sine:N`, `fm_sine:N` or `fm_sine:N:NOISE`.
impl FromStr for TaskSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |v: &str| v.parse::<usize>().map_err(|_| format!("`{v}` is not a non-negative integer"));
        match parts.as_slice() {
            ["xor"] => Ok(TaskSpec::Xor),
            ["parity", n] => Ok(TaskSpec::Parity { n: int(n)? }),
            ["sine", n] => Ok(TaskSpec::Sine { samples: int(n)? }),
            ["fm_sine", n] => Ok(TaskSpec::FmSine { length: int(n)?, noise: 0.0 }),
            ["fm_sine", n, noise] => {
                let noise = noise.parse::<f64>().ok().filter(|x| *x >= 0.0 && x.is_finite());
                let noise = noise.ok_or_else(|| format!("noise must be a number >= 0 in `{s}`"))?;
                Ok(TaskSpec::FmSine { length: int(n)?, noise })
            }
            _ => Err(format!("unknown task `{s}` (expected xor, parity:N, sine:N or fm_sine:N[:NOISE])")),
        }
    }
}

pub fn cmd_gen(task: &str, seed: u64, lag: Option<usize>, horizon: usize, out: Option<&Path>) -> CliResult<()> {
    let task: TaskSpec = task.parse().map_err(CliError::usage)?;
    let mut buf = Vec::new();
    match (task, lag) {
        (TaskSpec::FmSine { length, noise }, None) => {
            if length == 0 {
                return Err(CliError::usage("fm_sine length must be >= 1"));
            }
            buf.extend_from_slice(b"x\n");
            for x in fm_sine_series(length, noise, seed) {
                buf.extend_from_slice(format!("{x}\n").as_bytes());
            }
        }
        (TaskSpec::FmSine { length, noise }, Some(p)) => {
            let data = window_series(&fm_sine_series(length, noise, seed), p, horizon).map_err(CliError::usage)?;
            write_csv(&data, &mut buf)?;
        }
        (_, Some(_)) => return Err(CliError::usage("--lag only applies to the fm_sine series")),
        (pattern, None) => {
            let task = pattern.pattern_task().expect("not a series");
            let data = gen_task(task, seed).map_err(CliError::usage)?;
            write_csv(&data, &mut buf)?;
        }
    }
    emit(out, &String::from_utf8(buf).expect("csv is utf-8"))
}
