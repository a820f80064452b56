//! Time-stamped packet buffer at the actuator: newest-wins replacement,
//! per-step input selection, and the default-input fallback once the buffered
//! sequence is exhausted.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A control-input sequence generated at one time step: the input for the
/// generation step plus `n_seq` future steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    timestamp: u64,
    inputs: Vec<DVector<f64>>,
}

impl Packet {
    pub fn new(timestamp: u64, inputs: Vec<DVector<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument {
                context: "a packet needs at least one input".into(),
            });
        }
        let dim = inputs[0].len();
        if dim == 0 || inputs.iter().any(|u| u.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "packet inputs must share a nonzero dimension".into(),
            });
        }
        Ok(Self { timestamp, inputs })
    }

    /// Generation step of the packet.
    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    /// Number of future steps covered beyond the generation step.
    pub fn n_seq(&self) -> usize {
        self.inputs.len() - 1
    }

    /// The entry intended for step `k`, if the packet still covers it.
    pub fn input_for_step(&self, k: u64) -> Option<&DVector<f64>> {
        let age = k.checked_sub(self.timestamp)?;
        self.inputs.get(age as usize)
    }
}

/// The actuator-side buffer holding the most recent packet, together with the
/// default input applied when the buffer is empty or exhausted.
#[derive(Debug, Clone)]
pub struct BufferState {
    held: Option<Packet>,
    default_input: DVector<f64>,
    n_seq: usize,
}

impl BufferState {
    pub fn new(default_input: DVector<f64>, n_seq: usize) -> Self {
        Self {
            held: None,
            default_input,
            n_seq,
        }
    }

    pub fn held(&self) -> Option<&Packet> {
        self.held.as_ref()
    }

    pub fn default_input(&self) -> &DVector<f64> {
        &self.default_input
    }

    pub fn n_seq(&self) -> usize {
        self.n_seq
    }

    /// Offers a packet to the buffer. The packet replaces the held one only
    /// when its time stamp is strictly higher; duplicates and stale packets
    /// are neglected. Returns whether the replacement happened.
    pub fn offer_packet(&mut self, packet: Packet) -> Result<bool> {
        if packet.n_seq() != self.n_seq {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "packet covers {} future steps, buffer expects {}",
                    packet.n_seq(),
                    self.n_seq
                ),
            });
        }
        if packet.input_dim() != self.default_input.len() {
            return Err(Error::DimensionMismatch {
                context: "packet input dimension must match the default input".into(),
            });
        }
        let accept = match &self.held {
            None => true,
            Some(held) => packet.timestamp() > held.timestamp(),
        };
        if accept {
            self.held = Some(packet);
        }
        Ok(accept)
    }

    /// Input applied at step `k` together with the buffer age. Age `n_seq + 1`
    /// encodes an empty or exhausted buffer, in which case the default input
    /// is applied.
    pub fn actuate(&self, k: u64) -> Result<(DVector<f64>, usize)> {
        let exhausted_age = self.n_seq + 1;
        match &self.held {
            None => Ok((self.default_input.clone(), exhausted_age)),
            Some(held) => {
                if k < held.timestamp() {
                    return Err(Error::ClockViolation {
                        step: k,
                        timestamp: held.timestamp(),
                    });
                }
                let age = (k - held.timestamp()) as usize;
                match held.input_for_step(k) {
                    Some(input) => Ok((input.clone(), age)),
                    None => Ok((self.default_input.clone(), exhausted_age)),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_packet(timestamp: u64, values: &[f64]) -> Packet {
        Packet::new(
            timestamp,
            values.iter().map(|&v| DVector::from_vec(vec![v])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_buffer_accepts_any_packet() {
        let mut buf = BufferState::new(DVector::zeros(1), 2);
        assert!(buf
            .offer_packet(scalar_packet(5, &[1.0, 2.0, 3.0]))
            .unwrap());
        assert_eq!(buf.held().unwrap().timestamp(), 5);
    }

    #[test]
    fn stale_packet_is_neglected() {
        let mut buf = BufferState::new(DVector::zeros(1), 2);
        buf.offer_packet(scalar_packet(5, &[1.0, 2.0, 3.0]))
            .unwrap();
        assert!(!buf
            .offer_packet(scalar_packet(3, &[9.0, 9.0, 9.0]))
            .unwrap());
        assert_eq!(buf.held().unwrap().timestamp(), 5);
        // Duplicate delivery of the same stamp is "not higher" and rejected.
        assert!(!buf
            .offer_packet(scalar_packet(5, &[9.0, 9.0, 9.0]))
            .unwrap());
    }

    #[test]
    fn newer_packet_replaces() {
        let mut buf = BufferState::new(DVector::zeros(1), 2);
        buf.offer_packet(scalar_packet(5, &[1.0, 2.0, 3.0]))
            .unwrap();
        assert!(buf
            .offer_packet(scalar_packet(6, &[4.0, 5.0, 6.0]))
            .unwrap());
        assert_eq!(buf.held().unwrap().timestamp(), 6);
    }

    #[test]
    fn delayed_older_packet_loses_to_buffered_newer_one() {
        // n_seq = 2; packet from step 0 is delayed two steps, packet from
        // step 1 arrives immediately.
        let mut buf = BufferState::new(DVector::zeros(1), 2);
        buf.offer_packet(scalar_packet(1, &[11.0, 12.0, 13.0]))
            .unwrap();
        let (u, age) = buf.actuate(1).unwrap();
        assert_eq!((u[0], age), (11.0, 0));
        // Step 2: the old packet finally arrives and is discarded.
        assert!(!buf
            .offer_packet(scalar_packet(0, &[1.0, 2.0, 3.0]))
            .unwrap());
        let (u, age) = buf.actuate(2).unwrap();
        assert_eq!((u[0], age), (12.0, 1));
    }

    #[test]
    fn empty_buffer_applies_default() {
        let buf = BufferState::new(DVector::from_vec(vec![-0.25]), 3);
        let (u, age) = buf.actuate(17).unwrap();
        assert_eq!((u[0], age), (-0.25, 4));
    }

    #[test]
    fn exhausted_sequence_falls_back_to_default() {
        let mut buf = BufferState::new(DVector::zeros(1), 2);
        buf.offer_packet(scalar_packet(4, &[1.0, 2.0, 3.0]))
            .unwrap();
        let (u, age) = buf.actuate(6).unwrap();
        assert_eq!((u[0], age), (3.0, 2));
        let (u, age) = buf.actuate(7).unwrap();
        assert_eq!((u[0], age), (0.0, 3));
    }

    #[test]
    fn clock_violation_is_reported() {
        let mut buf = BufferState::new(DVector::zeros(1), 1);
        buf.offer_packet(scalar_packet(9, &[1.0, 2.0])).unwrap();
        assert!(matches!(
            buf.actuate(8),
            Err(Error::ClockViolation {
                step: 8,
                timestamp: 9
            })
        ));
    }

    #[test]
    fn malformed_packets_are_rejected() {
        assert!(Packet::new(0, vec![]).is_err());
        assert!(Packet::new(
            0,
            vec![
                DVector::from_vec(vec![1.0]),
                DVector::from_vec(vec![1.0, 2.0])
            ]
        )
        .is_err());

        let mut buf = BufferState::new(DVector::zeros(1), 2);
        // Wrong sequence length for this buffer.
        assert!(buf.offer_packet(scalar_packet(0, &[1.0, 2.0])).is_err());
        // Wrong input dimension.
        let wide = Packet::new(0, vec![DVector::from_vec(vec![1.0, 2.0]); 3]).unwrap();
        assert!(buf.offer_packet(wide).is_err());
    }

    #[test]
    fn age_grows_at_most_one_per_step() {
        // Feed a pseudo-random arrival pattern and check θ_{k+1} ≤ θ_k + 1,
        // with θ_k = 0 exactly when the packet stamped k was accepted at k.
        let mut buf = BufferState::new(DVector::zeros(1), 3);
        let mut prev_age = buf.n_seq() + 1;
        let mut state = 0x9e3779b97f4a7c15u64;
        for k in 0..500u64 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let delay = state % 5;
            let lost = state.is_multiple_of(7);
            // Offer every packet generated at k - delay that arrives now.
            if !lost && k >= delay {
                let stamp = k - delay;
                let accepted = buf
                    .offer_packet(scalar_packet(stamp, &[0.0, 0.0, 0.0, 0.0]))
                    .unwrap();
                let _ = accepted;
            }
            let (_, age) = buf.actuate(k).unwrap();
            assert!(age <= prev_age + 1, "age jumped from {prev_age} to {age}");
            if age == 0 {
                assert_eq!(buf.held().unwrap().timestamp(), k);
            }
            prev_age = age;
        }
    }
}
