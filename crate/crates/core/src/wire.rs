//! Incremental decode support shared by the protocol codecs.

/// Result of decoding from a byte buffer that may hold a partial frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome<T> {
    /// A complete frame and the number of bytes it consumed.
    Complete(T, usize),
    /// The buffer holds a strict prefix; at least this many more bytes
    /// are required before decoding can make progress.
    NeedMore(usize),
}

impl<T> DecodeOutcome<T> {
    pub fn expect_complete(self, what: &str) -> (T, usize) {
        match self {
            DecodeOutcome::Complete(t, n) => (t, n),
            DecodeOutcome::NeedMore(n) => panic!("{what}: needed {n} more bytes"),
        }
    }
}
