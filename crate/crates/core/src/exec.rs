use rayon::prelude::*;

/// How the patch and cell loops inside one color are scheduled.
///
/// Results are bitwise identical in both modes: work items of one color write
/// disjoint entries and their outputs are scattered back in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Computes one local block per item into consecutive `chunk`-sized
    /// slices of `out`, with one scratch value per worker.
    pub(crate) fn fill_chunks<I, S, R, Init, F>(
        self,
        items: &[I],
        chunk: usize,
        out: &mut [R],
        init: Init,
        f: F,
    ) where
        I: Sync,
        R: Send,
        S: Send,
        Init: Fn() -> S + Sync + Send,
        F: Fn(&mut S, &I, &mut [R]) + Sync + Send,
    {
        let out = &mut out[..items.len() * chunk];
        match self {
            Execution::Sequential => {
                let mut scratch = init();
                for (it, o) in items.iter().zip(out.chunks_mut(chunk)) {
                    f(&mut scratch, it, o);
                }
            }
            Execution::Parallel => {
                out.par_chunks_mut(chunk)
                    .zip(items.par_iter())
                    .with_min_len(4)
                    .for_each_init(&init, |s, (o, it)| f(s, it, o));
            }
        }
    }
}

/// Runs `compute` over every item of every color and hands the local results
/// to `scatter` in color order, item order within a color.
pub(crate) fn colored_loop<I, S, R, Init, F, G>(
    exec: Execution,
    colors: &[Vec<I>],
    chunk: usize,
    buffer: &mut Vec<R>,
    init: Init,
    compute: F,
    mut scatter: G,
) where
    I: Sync,
    R: Send + Copy + Default,
    S: Send,
    Init: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &I, &mut [R]) + Sync + Send,
    G: FnMut(&I, &[R]),
{
    for items in colors {
        let need = items.len() * chunk;
        if buffer.len() < need {
            buffer.resize(need, R::default());
        }
        exec.fill_chunks(items, chunk, buffer, &init, &compute);
        for (it, local) in items.iter().zip(buffer.chunks(chunk)) {
            scatter(it, local);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let colors = vec![(0..37).collect::<Vec<usize>>(), (100..120).collect()];
        let run = |exec| {
            let mut seen = Vec::new();
            let mut buf = Vec::new();
            colored_loop(
                exec,
                &colors,
                3,
                &mut buf,
                || 0usize,
                |calls, &i, out: &mut [f64]| {
                    *calls += 1;
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = (i * 3 + j) as f64;
                    }
                },
                |&i, local| seen.push((i, local.to_vec())),
            );
            seen
        };
        let a = run(Execution::Sequential);
        let b = run(Execution::Parallel);
        assert_eq!(a.len(), 57);
        assert_eq!(a, b);
        assert_eq!(a[40].0, 103);
    }
}
