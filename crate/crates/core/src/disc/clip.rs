//! Sub-clip sampling: fixed-length windows drawn uniformly without
//! replacement from an episode.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::mat::Mat;

/// One scoring unit: a window of an episode with its conditioning and the
/// policy-compatibility proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub episode_id: String,
    /// 0-indexed start of the window.
    pub start: usize,
    /// Joint state at the window start.
    pub state: Vec<f64>,
    /// Raw action chunk, chunk_len x dims.
    pub chunk: Mat,
    pub obs: Vec<f64>,
    pub instr: Vec<f64>,
    /// Z-scored negative denoising energy; `None` until computed.
    pub logpi_proxy: Option<f64>,
}

/// Draw `k` distinct clip start indices from `[0, T - len]`; all of them
/// when the episode has fewer candidate windows than `k`. Sorted ascending.
pub fn sample_clip_starts(
    episode_len: usize,
    k: usize,
    len: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if len > episode_len {
        return Err(Error::ChunkLongerThanEpisode {
            chunk: len,
            episode: episode_len,
        });
    }
    if k == 0 {
        return Err(Error::Config("clip count K must be >= 1".into()));
    }
    let candidates: Vec<usize> = (0..=episode_len - len).collect();
    let mut starts = if candidates.len() <= k {
        candidates
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut shuffled = candidates;
        shuffled.shuffle(&mut rng);
        shuffled.truncate(k);
        shuffled
    };
    starts.sort_unstable();
    Ok(starts)
}

/// Materialize clips at the given starts, borrowing conditioning vectors
/// computed once per episode.
pub fn clips_at(
    episode: &Episode,
    starts: &[usize],
    len: usize,
    obs: &[f64],
    instr: &[f64],
) -> Vec<Clip> {
    starts
        .iter()
        .map(|&start| Clip {
            episode_id: episode.episode_id.clone(),
            start,
            state: episode.states.row(start).to_vec(),
            chunk: episode.actions.slice_rows(start, start + len),
            obs: obs.to_vec(),
            instr: instr.to_vec(),
            logpi_proxy: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_yields_single_clip_at_origin() {
        let starts = sample_clip_starts(32, 4, 32, 0).unwrap();
        assert_eq!(starts, vec![0]);
    }

    #[test]
    fn starts_are_distinct_in_range_and_deterministic() {
        let starts = sample_clip_starts(160, 4, 32, 7).unwrap();
        assert_eq!(starts.len(), 4);
        for w in starts.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(*starts.last().unwrap() <= 128);
        assert_eq!(starts, sample_clip_starts(160, 4, 32, 7).unwrap());
        assert_ne!(starts, sample_clip_starts(160, 4, 32, 8).unwrap());
    }

    #[test]
    fn chunk_longer_than_episode_rejected() {
        assert!(matches!(
            sample_clip_starts(16, 2, 32, 0),
            Err(Error::ChunkLongerThanEpisode { .. })
        ));
    }

    #[test]
    fn clips_carry_window_content() {
        let ep = crate::episode::tests::toy_episode("ep", 20, 3);
        let starts = sample_clip_starts(ep.len(), 2, 5, 1).unwrap();
        let clips = clips_at(&ep, &starts, 5, &[0.5; 4], &[0.1; 8]);
        for clip in &clips {
            assert_eq!(clip.chunk.shape(), (5, 3));
            assert_eq!(clip.state, ep.states.row(clip.start).to_vec());
            assert_eq!(clip.obs.len(), 4);
            assert!(clip.logpi_proxy.is_none());
        }
    }
}
