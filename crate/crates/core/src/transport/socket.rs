//! Loopback TCP fabric: one listener per rank, one outbound stream per
//! ordered rank pair. A reader thread per inbound stream decodes frames into
//! the receiving worker's queue, so receive-side matching is shared with the
//! in-process backend.

use std::net::{Ipv4Addr, TcpListener, TcpStream};
use std::sync::mpsc::Sender;
use std::thread::Scope;

use super::frame::read_frame;
use super::{LaunchError, Message, Outbox};

pub(crate) fn connect_mesh<'scope>(
    scope: &'scope Scope<'scope, '_>,
    senders: &[Sender<Message>],
) -> Result<Vec<Outbox>, LaunchError> {
    let world_size = senders.len();
    let listeners = (0..world_size)
        .map(|rank| {
            TcpListener::bind((Ipv4Addr::LOCALHOST, 0))
                .map_err(|source| LaunchError::Setup { rank, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let addrs = listeners
        .iter()
        .enumerate()
        .map(|(rank, l)| {
            l.local_addr()
                .map_err(|source| LaunchError::Setup { rank, source })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut outboxes = Vec::with_capacity(world_size);
    for rank in 0..world_size {
        let mut streams = Vec::with_capacity(world_size);
        for (peer, addr) in addrs.iter().enumerate() {
            if peer == rank {
                streams.push(None);
                continue;
            }
            let stream =
                TcpStream::connect(addr).map_err(|source| LaunchError::Setup { rank, source })?;
            stream
                .set_nodelay(true)
                .map_err(|source| LaunchError::Setup { rank, source })?;
            streams.push(Some(stream));
        }
        outboxes.push(Outbox::Socket(streams));
    }

    // Connections are already queued in each listener's backlog.
    for (rank, listener) in listeners.iter().enumerate() {
        for _ in 1..world_size {
            let (mut stream, _) = listener
                .accept()
                .map_err(|source| LaunchError::Setup { rank, source })?;
            let sender = senders[rank].clone();
            scope.spawn(move || {
                while let Ok(Some(msg)) = read_frame(&mut stream) {
                    if sender.send(msg).is_err() {
                        break;
                    }
                }
            });
        }
    }
    Ok(outboxes)
}
