//! Envelope framing over byte streams.

use std::io::{self, Read, Write};

use drive_core::wire::{self, Envelope, WireError, HEADER_LEN};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
}

impl NetError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, NetError::Io(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
    }
}

/// Read one envelope. The header is validated before the payload buffer is
/// allocated, so a hostile length never allocates more than the cap.
pub fn read_envelope<R: Read>(r: &mut R) -> Result<Envelope, NetError> {
    let mut header = [0u8; HEADER_LEN];
    match r.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Err(NetError::Closed),
        Err(e) => return Err(e.into()),
    }
    let (msg_type, len) = wire::parse_header(&header)?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Envelope { msg_type, payload })
}

pub fn write_envelope<W: Write>(w: &mut W, env: &Envelope) -> Result<(), NetError> {
    w.write_all(&env.header())?;
    w.write_all(&env.payload)?;
    w.flush()?;
    Ok(())
}
