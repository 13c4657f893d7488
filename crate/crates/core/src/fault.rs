//! Test-only fault injection. Each fault flips one sign deep inside a
//! numerical routine so tests can confirm that the checks built on that
//! routine actually fail when it is wrong.

use std::cell::Cell;

#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Barrier integrand uses (1 + z^p) in place of (1 − z^p).
    BarrierSymmetrization,
    /// Generator adds the gradient compensation instead of subtracting it.
    GeneratorCompensation,
}

thread_local! {
    static ACTIVE: Cell<Fault> = const { Cell::new(Fault::None) };
}

#[doc(hidden)]
pub fn with_fault<R>(fault: Fault, f: impl FnOnce() -> R) -> R {
    let prev = ACTIVE.with(|c| c.replace(fault));
    let out = f();
    ACTIVE.with(|c| c.set(prev));
    out
}

pub(crate) fn active(fault: Fault) -> bool {
    ACTIVE.with(|c| c.get() == fault)
}
