//! Stand-in denoiser bridge for tests and demos. Speaks the EPQ1/EPR1
//! protocol on stdin/stdout and can misbehave on purpose.

use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use batchdiff_core::denoiser::oracle_gaussian_eps;
use batchdiff_core::denoiser::protocol::{
    read_handshake, read_request, write_handshake, write_response, EpsResponse, PROTOCOL_VERSION,
};
use batchdiff_core::{EpsModel, Error, NoisePredictor, Shape, VideoTensor};
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// All-zero noise prediction.
    Zero,
    /// Oracle prediction for a N(mu, sigma0^2) prior.
    Gaussian,
    /// The in-process smoothing denoiser.
    Smoother,
    /// Answers with one frame fewer than requested.
    WrongDims,
    /// Exits after reading a request, without answering.
    Die,
    /// Reads a request and never answers.
    Hang,
    /// Echoes protocol version 2.
    BadVersion,
    /// Answers every request with status 1.
    ErrorStatus,
    /// Answers with a bad magic.
    Malformed,
    /// Answers with NaN noise.
    Nan,
}

#[derive(Parser, Debug)]
struct Args {
    #[arg(long, value_enum, default_value = "zero")]
    mode: Mode,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    #[arg(long, default_value_t = 0.25)]
    sigma0: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Serve this many requests normally before the faulty behavior starts.
    #[arg(long, default_value_t = 0)]
    after: usize,
    #[arg(long, default_value_t = 1 << 26)]
    max_elements: usize,
}

fn serve(args: &Args) -> batchdiff_core::Result<()> {
    let mut input = BufReader::new(io::stdin().lock());
    let mut out = BufWriter::new(io::stdout().lock());
    let version = read_handshake(&mut input)?;
    let reply = if args.mode == Mode::BadVersion { PROTOCOL_VERSION + 1 } else { version.min(PROTOCOL_VERSION) };
    write_handshake(&mut out, reply)?;
    if version != PROTOCOL_VERSION || args.mode == Mode::BadVersion {
        return Ok(());
    }

    let smoother = EpsModel::Smoother { scale: args.scale };
    let mut served = 0usize;
    loop {
        let req = match read_request(&mut input, args.max_elements) {
            Ok(r) => r,
            Err(Error::PeerClosed) => return Ok(()),
            Err(e @ Error::ExternalProtocol(_)) => {
                write_response(&mut out, &EpsResponse::Failed { status: 2, message: e.to_string() })?;
                continue;
            }
            Err(e) => return Err(e),
        };
        let faulty = served >= args.after;
        served += 1;
        let shape = req.x_t.shape();
        let rsp = match args.mode {
            Mode::Die if faulty => return Ok(()),
            Mode::Hang if faulty => loop {
                thread::sleep(Duration::from_secs(3600));
            },
            Mode::Malformed if faulty => {
                out.write_all(b"JUNKJUNKJUNK").map_err(Error::Io)?;
                out.flush().map_err(Error::Io)?;
                continue;
            }
            Mode::ErrorStatus if faulty => EpsResponse::Failed {
                status: 1,
                message: "model failure".into(),
            },
            Mode::WrongDims if faulty && shape.frames > 1 => {
                EpsResponse::Ok(VideoTensor::zeros(Shape::new(shape.frames - 1, shape.channels, shape.height, shape.width)))
            }
            Mode::WrongDims if faulty => EpsResponse::Ok(VideoTensor::zeros(shape.with_frames(2))),
            Mode::Nan if faulty => EpsResponse::Ok(VideoTensor::filled(shape, f64::NAN)),
            Mode::Gaussian => EpsResponse::Ok(oracle_gaussian_eps(&req.x_t, req.abar, args.mu, args.sigma0)),
            Mode::Smoother => match smoother.predict(&req.x_t, req.t_index as usize, req.abar) {
                Ok(eps) => EpsResponse::Ok(eps),
                Err(e) => EpsResponse::Failed { status: 3, message: e.to_string() },
            },
            _ => EpsResponse::Ok(VideoTensor::zeros(shape)),
        };
        write_response(&mut out, &rsp)?;
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match serve(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mock bridge: {e}");
            ExitCode::FAILURE
        }
    }
}
