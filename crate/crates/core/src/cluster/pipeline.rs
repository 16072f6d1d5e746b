//! Three-stage pipeline: one input thread, a pool of workers and an output
//! stage, connected by bounded queues.
//!
//! Items are numbered in input order. Workers may finish out of order; the
//! output stage buffers and hands results to the sink strictly by index, so a
//! pipelined run observes the same sequence as a sequential one.

use std::collections::BTreeMap;

use crossbeam_channel::bounded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Worker threads. Zero runs every stage inline on the caller's thread.
    pub workers: usize,
    /// Capacity of each queue.
    pub queue_depth: usize,
}

impl PipelineConfig {
    pub fn sequential() -> PipelineConfig {
        PipelineConfig {
            workers: 0,
            queue_depth: 1,
        }
    }

    pub fn pipelined(workers: usize) -> PipelineConfig {
        PipelineConfig {
            workers: workers.max(1),
            queue_depth: 16,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let workers = std::thread::available_parallelism().map_or(2, |p| p.get()).clamp(1, 8);
        PipelineConfig::pipelined(workers)
    }
}

/// Runs `input -> work -> sink`. The first error in index order stops the
/// run and is returned.
pub fn run_pipeline<I, J, R, E, W, S>(
    config: &PipelineConfig,
    input: I,
    work: W,
    mut sink: S,
) -> Result<(), E>
where
    I: Iterator<Item = Result<J, E>> + Send,
    J: Send,
    R: Send,
    E: Send,
    W: Fn(J) -> Result<R, E> + Sync,
    S: FnMut(u64, R) -> Result<(), E>,
{
    if config.workers == 0 {
        for (idx, item) in input.enumerate() {
            let result = work(item?)?;
            sink(idx as u64, result)?;
        }
        return Ok(());
    }

    let depth = config.queue_depth.max(1);
    std::thread::scope(|scope| {
        let (job_tx, job_rx) = bounded::<(u64, J)>(depth);
        let (res_tx, res_rx) = bounded::<(u64, Result<R, E>)>(depth);

        let input_res = res_tx.clone();
        scope.spawn(move || {
            for (idx, item) in input.enumerate() {
                let idx = idx as u64;
                match item {
                    Ok(job) => {
                        if job_tx.send((idx, job)).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        let _ = input_res.send((idx, Err(e)));
                        return;
                    }
                }
            }
        });

        let work = &work;
        for _ in 0..config.workers {
            let job_rx = job_rx.clone();
            let res_tx = res_tx.clone();
            scope.spawn(move || {
                for (idx, job) in job_rx {
                    if res_tx.send((idx, work(job))).is_err() {
                        return;
                    }
                }
            });
        }
        drop(job_rx);
        drop(res_tx);

        let mut pending = BTreeMap::new();
        let mut next = 0u64;
        for (idx, result) in res_rx.iter() {
            pending.insert(idx, result);
            while let Some(result) = pending.remove(&next) {
                let outcome = result.and_then(|r| sink(next, r));
                if let Err(e) = outcome {
                    // Dropping the receiver unblocks workers, which in turn
                    // releases the input thread.
                    drop(res_rx);
                    return Err(e);
                }
                next += 1;
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect(config: &PipelineConfig, n: u64) -> Result<Vec<(u64, u64)>, String> {
        let mut out = Vec::new();
        run_pipeline(
            config,
            (0..n).map(Ok::<u64, String>),
            |x| {
                // uneven work so workers finish out of order
                if x % 7 == 0 {
                    std::thread::sleep(std::time::Duration::from_millis(2));
                }
                Ok(x * x)
            },
            |idx, r| {
                out.push((idx, r));
                Ok(())
            },
        )?;
        Ok(out)
    }

    #[test]
    fn pipelined_matches_sequential() {
        let seq = collect(&PipelineConfig::sequential(), 200).unwrap();
        for workers in [1, 3, 8] {
            let par = collect(
                &PipelineConfig {
                    workers,
                    queue_depth: 2,
                },
                200,
            )
            .unwrap();
            assert_eq!(par, seq);
        }
        assert_eq!(seq[10], (10, 100));
    }

    #[test]
    fn errors_stop_the_run() {
        for config in [PipelineConfig::sequential(), PipelineConfig::pipelined(4)] {
            let mut seen = Vec::new();
            let err = run_pipeline(
                &config,
                (0..1000u64).map(Ok::<u64, String>),
                |x| if x == 50 { Err(format!("boom at {x}")) } else { Ok(x) },
                |idx, _| {
                    seen.push(idx);
                    Ok(())
                },
            )
            .unwrap_err();
            assert_eq!(err, "boom at 50");
            assert_eq!(seen, (0..50).collect::<Vec<_>>());
        }
    }

    #[test]
    fn input_errors_propagate() {
        let input = (0..10u64).map(|x| if x == 3 { Err("bad input".to_string()) } else { Ok(x) });
        let err = run_pipeline(&PipelineConfig::pipelined(2), input, Ok, |_, _| Ok(())).unwrap_err();
        assert_eq!(err, "bad input");
    }

    #[test]
    fn empty_input() {
        let mut called = false;
        run_pipeline(
            &PipelineConfig::pipelined(2),
            std::iter::empty::<Result<u8, ()>>(),
            Ok,
            |_, _: u8| {
                called = true;
                Ok(())
            },
        )
        .unwrap();
        assert!(!called);
    }
}
