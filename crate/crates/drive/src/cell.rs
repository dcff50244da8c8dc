//! Latest-value exchange cell and resident-frame instrumentation.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

/// Single-slot mailbox: `offer` replaces whatever is stored, `take` empties it.
pub struct LatestCell<T> {
    state: Mutex<Slot<T>>,
    changed: Condvar,
}

struct Slot<T> {
    value: Option<T>,
    closed: bool,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Take<T> {
    Item(T),
    Empty,
    /// Closed and drained.
    Closed,
}

impl<T> Default for LatestCell<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> LatestCell<T> {
    pub fn new() -> Self {
        Self { state: Mutex::new(Slot { value: None, closed: false }), changed: Condvar::new() }
    }

    fn lock(&self) -> MutexGuard<'_, Slot<T>> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Store `v`, returning the value it displaced. Never blocks beyond the
    /// lock.
    pub fn offer(&self, v: T) -> Option<T> {
        let mut s = self.lock();
        let old = s.value.replace(v);
        self.changed.notify_all();
        old
    }

    /// Drop the stored value first, then build the replacement under the
    /// lock, so the old and new values never coexist. Returns whether a value
    /// was displaced.
    pub fn offer_with(&self, make: impl FnOnce() -> T) -> bool {
        let mut s = self.lock();
        let displaced = s.value.take().is_some();
        s.value = Some(make());
        self.changed.notify_all();
        displaced
    }

    pub fn take(&self) -> Option<T> {
        let mut s = self.lock();
        let v = s.value.take();
        if v.is_some() {
            self.changed.notify_all();
        }
        v
    }

    /// Wait up to `timeout` (forever if `None`) for a value. A closed cell
    /// still hands out its last value before reporting `Closed`.
    pub fn take_wait(&self, timeout: Option<Duration>) -> Take<T> {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut s = self.lock();
        loop {
            if let Some(v) = s.value.take() {
                self.changed.notify_all();
                return Take::Item(v);
            }
            if s.closed {
                return Take::Closed;
            }
            s = match deadline {
                None => self.changed.wait(s).unwrap_or_else(|e| e.into_inner()),
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        return Take::Empty;
                    }
                    self.changed.wait_timeout(s, d - now).unwrap_or_else(|e| e.into_inner()).0
                }
            };
        }
    }

    /// Block until the slot is empty or the cell is closed. Returns `false`
    /// if closed.
    pub fn wait_empty(&self) -> bool {
        let mut s = self.lock();
        while s.value.is_some() && !s.closed {
            s = self.changed.wait(s).unwrap_or_else(|e| e.into_inner());
        }
        !s.closed
    }

    pub fn close(&self) {
        self.lock().closed = true;
        self.changed.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    pub fn is_empty(&self) -> bool {
        self.lock().value.is_none()
    }
}

/// Counts frames currently alive inside a pipeline and the peak.
#[derive(Debug, Default)]
pub struct ResidentGauge {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl ResidentGauge {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn token(self: &Arc<Self>) -> ResidentToken {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        ResidentToken(self.clone())
    }

    pub fn current(&self) -> usize {
        self.current.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

/// One resident frame; released on drop.
#[derive(Debug)]
pub struct ResidentToken(Arc<ResidentGauge>);

impl Drop for ResidentToken {
    fn drop(&mut self) {
        self.0.current.fetch_sub(1, Ordering::SeqCst);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn replacement_semantics() {
        let c = LatestCell::new();
        assert_eq!(c.take(), None);
        c.offer(1);
        assert_eq!(c.offer(2), Some(1));
        assert_eq!(c.take(), Some(2));
        assert_eq!(c.take(), None);
    }

    #[test]
    fn thousand_offers_keep_the_last() {
        let c = LatestCell::new();
        for i in 1..=1000 {
            c.offer(i);
        }
        assert_eq!(c.take(), Some(1000));
        assert_eq!(c.take(), None);
    }

    #[test]
    fn closed_cell_drains_then_reports_closed() {
        let c = LatestCell::new();
        c.offer(7);
        c.close();
        assert_eq!(c.take_wait(None), Take::Item(7));
        assert_eq!(c.take_wait(None), Take::Closed);
        assert!(!c.wait_empty());
    }

    #[test]
    fn take_wait_times_out() {
        let c: LatestCell<u8> = LatestCell::new();
        assert_eq!(c.take_wait(Some(Duration::from_millis(5))), Take::Empty);
    }

    #[test]
    fn offer_with_never_overlaps() {
        let g = ResidentGauge::new();
        let c = LatestCell::new();
        for _ in 0..10 {
            c.offer_with(|| g.token());
        }
        assert_eq!(g.peak(), 1);
        drop(c.take());
        assert_eq!(g.current(), 0);
    }

    #[test]
    fn one_writer_one_reader() {
        let c = Arc::new(LatestCell::new());
        let w = {
            let c = c.clone();
            thread::spawn(move || {
                for i in 1..=20_000u32 {
                    c.offer(i);
                }
                c.close();
            })
        };
        let mut last = 0;
        loop {
            match c.take_wait(None) {
                Take::Item(v) => {
                    assert!(v > last, "values must arrive in increasing order");
                    last = v;
                }
                Take::Closed => break,
                Take::Empty => unreachable!(),
            }
        }
        w.join().unwrap();
        assert_eq!(last, 20_000);
    }

    #[test]
    fn wait_empty_wakes_on_take() {
        let c = Arc::new(LatestCell::new());
        c.offer(1);
        let r = {
            let c = c.clone();
            thread::spawn(move || {
                thread::sleep(Duration::from_millis(10));
                c.take()
            })
        };
        assert!(c.wait_empty());
        assert_eq!(r.join().unwrap(), Some(1));
    }
}
