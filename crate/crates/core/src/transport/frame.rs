//! Wire framing used by the socket backend.
//!
//! Layout (all header integers big-endian):
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 4     | payload length `N`                      |
//! | 4     | tag                                     |
//! | 4     | source rank                             |
//! | 1     | element kind (0 bytes, 1 f64, 2 c64)    |
//! | 4     | row count                               |
//! | 4     | column count                            |
//! | `N`   | payload                                 |
//!
//! Floating point elements are little-endian IEEE-754 in row-major order,
//! complex elements as `(re, im)` pairs.

use std::io::{self, Read};

use ndarray::Array2;
use num_complex::Complex64;

use super::{ElemKind, Message, Payload};

pub const HEADER_LEN: usize = 21;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("frame truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unknown element kind code {0}")]
    UnknownKind(u8),
    #[error("payload length {len} inconsistent with {kind:?} shape {rows}x{cols}")]
    LengthMismatch {
        len: usize,
        kind: ElemKind,
        rows: usize,
        cols: usize,
    },
    #[error("payload of {0} bytes does not fit a 32-bit length field")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn be_u32(bytes: &[u8]) -> u32 {
    u32::from_be_bytes(bytes.try_into().expect("4-byte slice"))
}

fn to_u32(value: usize, payload_len: usize) -> Result<u32, FrameError> {
    u32::try_from(value).map_err(|_| FrameError::TooLarge(payload_len))
}

/// Serializes one message into a self-delimiting frame.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, FrameError> {
    let kind = msg.payload.kind();
    let (rows, cols) = msg.payload.shape();
    let len = msg.payload.byte_len();
    let mut out = Vec::with_capacity(HEADER_LEN + len);
    out.extend_from_slice(&to_u32(len, len)?.to_be_bytes());
    out.extend_from_slice(&msg.tag.to_be_bytes());
    out.extend_from_slice(&to_u32(msg.source, len)?.to_be_bytes());
    out.push(kind.code());
    out.extend_from_slice(&to_u32(rows, len)?.to_be_bytes());
    out.extend_from_slice(&to_u32(cols, len)?.to_be_bytes());
    match &msg.payload {
        Payload::Bytes(bytes) => out.extend_from_slice(bytes),
        Payload::Real(a) => {
            for x in a.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Payload::Complex(a) => {
            for z in a.iter() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Header {
    len: usize,
    tag: u32,
    source: usize,
    kind: ElemKind,
    rows: usize,
    cols: usize,
}

fn parse_header(h: &[u8]) -> Result<Header, FrameError> {
    let len = be_u32(&h[0..4]) as usize;
    let tag = be_u32(&h[4..8]);
    let source = be_u32(&h[8..12]) as usize;
    let kind = ElemKind::from_code(h[12]).ok_or(FrameError::UnknownKind(h[12]))?;
    let rows = be_u32(&h[13..17]) as usize;
    let cols = be_u32(&h[17..21]) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(kind.elem_size()));
    if expected != Some(len) {
        return Err(FrameError::LengthMismatch {
            len,
            kind,
            rows,
            cols,
        });
    }
    Ok(Header {
        len,
        tag,
        source,
        kind,
        rows,
        cols,
    })
}

fn build_payload(h: &Header, body: &[u8]) -> Payload {
    match h.kind {
        ElemKind::Bytes => Payload::Bytes(body.to_vec()),
        ElemKind::Real => {
            let data = body
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Payload::Real(Array2::from_shape_vec((h.rows, h.cols), data).unwrap())
        }
        ElemKind::Complex => {
            let data = body
                .chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect();
            Payload::Complex(Array2::from_shape_vec((h.rows, h.cols), data).unwrap())
        }
    }
}

/// Decodes one frame from the front of `buf`, returning the message and the
/// number of bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(Message, usize), FrameError> {
    if buf.len() < HEADER_LEN {
        return Err(FrameError::Truncated {
            needed: HEADER_LEN,
            available: buf.len(),
        });
    }
    let h = parse_header(&buf[..HEADER_LEN])?;
    let total = HEADER_LEN + h.len;
    if buf.len() < total {
        return Err(FrameError::Truncated {
            needed: total,
            available: buf.len(),
        });
    }
    let payload = build_payload(&h, &buf[HEADER_LEN..total]);
    Ok((
        Message {
            source: h.source,
            tag: h.tag,
            payload,
        },
        total,
    ))
}

/// Reads one frame from a stream. `Ok(None)` signals a clean end of stream.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Message>, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => {
                return Err(FrameError::Truncated {
                    needed: HEADER_LEN,
                    available: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let h = parse_header(&header)?;
    let mut body = vec![0u8; h.len];
    reader.read_exact(&mut body)?;
    let payload = build_payload(&h, &body);
    Ok(Some(Message {
        source: h.source,
        tag: h.tag,
        payload,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn header_layout_is_big_endian() {
        let msg = Message {
            source: 3,
            tag: 7,
            payload: Payload::Real(array![[1.0, 2.0]]),
        };
        let frame = encode_frame(&msg).unwrap();
        assert_eq!(frame.len(), HEADER_LEN + 16);
        assert_eq!(&frame[0..4], &[0, 0, 0, 16]);
        assert_eq!(&frame[4..8], &[0, 0, 0, 7]);
        assert_eq!(&frame[8..12], &[0, 0, 0, 3]);
        assert_eq!(frame[12], 1);
        assert_eq!(&frame[13..17], &[0, 0, 0, 1]);
        assert_eq!(&frame[17..21], &[0, 0, 0, 2]);
        assert_eq!(&frame[21..29], &1.0f64.to_le_bytes());
        assert_eq!(&frame[29..37], &2.0f64.to_le_bytes());
    }

    #[test]
    fn complex_elements_are_re_im_pairs() {
        let msg = Message {
            source: 0,
            tag: 1,
            payload: Payload::Complex(array![[Complex64::new(1.5, -2.0)]]),
        };
        let frame = encode_frame(&msg).unwrap();
        assert_eq!(frame[12], 2);
        assert_eq!(&frame[21..29], &1.5f64.to_le_bytes());
        assert_eq!(&frame[29..37], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn bytes_frame_uses_single_row_shape() {
        let msg = Message {
            source: 1,
            tag: 0,
            payload: Payload::Bytes(vec![9, 8, 7]),
        };
        let frame = encode_frame(&msg).unwrap();
        assert_eq!(frame[12], 0);
        assert_eq!(&frame[13..21], &[0, 0, 0, 1, 0, 0, 0, 3]);
        let (back, used) = decode_frame(&frame).unwrap();
        assert_eq!(used, frame.len());
        assert_eq!(back, msg);
    }

    #[test]
    fn rejects_inconsistent_length() {
        let msg = Message {
            source: 0,
            tag: 0,
            payload: Payload::Real(array![[1.0, 2.0]]),
        };
        let mut frame = encode_frame(&msg).unwrap();
        frame[20] = 3;
        assert!(matches!(
            decode_frame(&frame),
            Err(FrameError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn rejects_unknown_kind_and_truncation() {
        let msg = Message {
            source: 0,
            tag: 0,
            payload: Payload::Bytes(vec![1, 2]),
        };
        let mut frame = encode_frame(&msg).unwrap();
        assert!(matches!(
            decode_frame(&frame[..frame.len() - 1]),
            Err(FrameError::Truncated { .. })
        ));
        frame[12] = 9;
        assert!(matches!(
            decode_frame(&frame),
            Err(FrameError::UnknownKind(9))
        ));
    }

    #[test]
    fn stream_reader_sees_clean_eof() {
        let msg = Message {
            source: 2,
            tag: 5,
            payload: Payload::Real(Array2::zeros((0, 4))),
        };
        let frame = encode_frame(&msg).unwrap();
        let mut cursor = io::Cursor::new(frame);
        assert_eq!(read_frame(&mut cursor).unwrap(), Some(msg));
        assert_eq!(read_frame(&mut cursor).unwrap(), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn real_frames_round_trip(
                rows in 0usize..6,
                cols in 0usize..6,
                tag in any::<u32>(),
                source in 0usize..1024,
                seed in proptest::collection::vec(any::<f64>(), 36),
            ) {
                let data = seed[..rows * cols].to_vec();
                let msg = Message {
                    source,
                    tag,
                    payload: Payload::Real(Array2::from_shape_vec((rows, cols), data).unwrap()),
                };
                let frame = encode_frame(&msg).unwrap();
                let (back, used) = decode_frame(&frame).unwrap();
                prop_assert_eq!(used, frame.len());
                // Compare bit patterns so NaN payloads count as equal.
                let (Payload::Real(a), Payload::Real(b)) = (&msg.payload, &back.payload) else {
                    unreachable!()
                };
                prop_assert_eq!(a.shape(), b.shape());
                prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
                prop_assert_eq!(back.tag, tag);
                prop_assert_eq!(back.source, source);
            }
        }
    }
}
