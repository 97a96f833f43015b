//! Fixtures shared by the benchmarks.

use batchdiff_core::{parse_op, synth_video, LinearOp, Shape, SynthKind, VideoTensor};

/// A moving-square clip, an operator and its noiseless measurement.
pub fn problem(shape: Shape, descriptor: &str) -> (VideoTensor, LinearOp, VideoTensor) {
    let x = synth_video(SynthKind::MovingSquare, shape, 0).expect("valid shape");
    let a = parse_op(descriptor, shape).expect("valid descriptor");
    let y = a.apply(&x).expect("shapes agree");
    (x, a, y)
}
