/// Blink suppression over the pupil confidence stream.
///
/// A frame is kept only if its own confidence and the confidences of the two
/// preceding frames all reach the threshold. A single dip therefore costs
/// three frames (the dip plus two recovery frames, ~133 ms at 15 fps), which
/// covers eyelid motion blur on either side of a blink.
#[derive(Debug, Clone)]
pub struct BlinkGate {
    threshold: f64,
    /// Confidences of frames t-1 and t-2; frames before the stream start
    /// count as confident.
    history: [f64; 2],
}

impl Default for BlinkGate {
    fn default() -> Self {
        BlinkGate::new(0.96)
    }
}

impl BlinkGate {
    pub fn new(threshold: f64) -> Self {
        BlinkGate {
            threshold,
            history: [1.0, 1.0],
        }
    }

    /// Feeds one frame's confidence; returns whether the frame is kept.
    /// Failed pupil detection should be fed as 0.0.
    pub fn admit(&mut self, confidence: f64) -> bool {
        let keep = confidence >= self.threshold
            && self.history[0] >= self.threshold
            && self.history[1] >= self.threshold;
        self.history = [confidence, self.history[0]];
        keep
    }

    pub fn reset(&mut self) {
        self.history = [1.0, 1.0];
    }
}
