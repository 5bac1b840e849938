//! The method corpus shared by the equivalence suites, the structural SSA
//! checks and the pipeline benchmarks, together with deterministic
//! argument generation and the outcome mapping that makes the three
//! execution backends comparable.

use crate::runtime::{Backend, Oop, RuntimeError, Vm};
use crate::ir::IrEvalError;

/// Deterministic pseudo-random generator (64-bit LCG), so frozen seeds
/// reproduce the exact argument tuples.
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    pub fn next_i64(&mut self) -> i64 {
        self.next_u64() as i64
    }

    /// Uniform-ish value in `0..bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound.max(1)
    }
}

/// The bundle every suite loads. Categories: arithmetic, bit ops, nested
/// sends, control templates, blocks reading outer temps, internal calls,
/// VM calls.
pub const EQUIVALENCE_BUNDLE: &str = r#"
Corpus>>addTwo: a with: b
	^ a + b

Corpus>>subMul: a with: b
	^ (a - b) * (a + b)

Corpus>>divMod: a with: b
	^ (a // b) + (a \\ b)

Corpus>>negate: a
	^ 0 - a

Corpus>>polynomial: x
	^ ((x * x) + (3 * x)) - 7

Corpus>>ratio: a with: b and: c
	^ ((a + b) * (a - c)) // ((b bitAnd: 15) + 1)

Corpus>>maskLow: a
	^ a bitAnd: 255

Corpus>>combine: a with: b
	^ (a bitAnd: b) bitXor: (a bitOr: b)

Corpus>>shiftLeftThree: a
	^ a bitShift: 3

Corpus>>shiftRightLogical: a
	^ a bitShift: -5

Corpus>>shiftRightSigned: a
	<var: #a type: #int>
	^ a bitShift: -5

Corpus>>dynamicShift: a by: b
	^ a bitShift: (b \\ 16) - 8

Corpus>>parity: a
	| p v i |
	p := 0.
	v := a.
	i := 0.
	[ i < 64 ] whileTrue: [
		p := p bitXor: (v bitAnd: 1).
		v := v bitShift: -1.
		i := i + 1 ].
	^ p

Corpus>>maxOf: a with: b
	^ a > b ifTrue: [ a ] ifFalse: [ b ]

Corpus>>signOf: a
	^ a < 0
		ifTrue: [ 0 - 1 ]
		ifFalse: [ a = 0 ifTrue: [ 0 ] ifFalse: [ 1 ] ]

Corpus>>absOf: a
	| r |
	r := a.
	a < 0 ifTrue: [ r := 0 - a ].
	^ r

Corpus>>clamp: a lo: lo hi: hi
	| r |
	r := a.
	a < lo ifTrue: [ r := lo ].
	a > hi ifTrue: [ r := hi ].
	^ r

Corpus>>bothPositive: a and: b
	^ (a > 0) bitAnd: (b > 0)

Corpus>>notEqual: a to: b
	^ a ~= b

Corpus>>whileSum: n
	| limit s i |
	limit := n \\ 50.
	s := 0.
	i := 0.
	[ i < limit ] whileTrue: [ s := s + i. i := i + 1 ].
	^ s

Corpus>>countdown: n
	| i steps |
	i := n \\ 40.
	steps := 0.
	[ i > 0 ] whileTrue: [ i := i - 1. steps := steps + 1 ].
	^ steps

Corpus>>sumTo: n
	| s |
	s := 0.
	1 to: n \\ 30 do: [ :i | s := s + i ].
	^ s

Corpus>>nestedLoop: n
	| s |
	s := 0.
	1 to: n \\ 10 do: [ :i | 1 to: i do: [ :j | s := s + (i * j) ] ].
	^ s

Corpus>>earlyExit: a
	a = 0 ifTrue: [ ^ 99 ] ifFalse: [ ^ a + 1 ]

Corpus>>accumulate: n
	| acc |
	acc := 7.
	1 to: n \\ 20 do: [ :i | acc := acc + (i * 2) ].
	^ acc

Corpus>>outerProduct: a with: b
	| total |
	total := 0.
	1 to: a \\ 8 do: [ :i | | inner | inner := i * b. total := total + inner ].
	^ total

Corpus>>shadow: x
	| v |
	v := x.
	1 to: 3 do: [ :i | v := v + i ].
	^ v

Corpus>>double: x
	^ x + x

Corpus>>quadruple: x
	^ self double: (self double: x)

Corpus>>fibOf: n
	^ n < 2 ifTrue: [ n ] ifFalse: [ (self fibOf: n - 1) + (self fibOf: n - 2) ]

Corpus>>fibWrap: n
	| m |
	m := n \\ 14.
	m < 0 ifTrue: [ m := 0 - m ].
	^ self fibOf: m

Corpus>>mutualA: n
	^ n <= 0 ifTrue: [ 0 ] ifFalse: [ 1 + (self mutualB: n - 1) ]

Corpus>>mutualB: n
	^ n <= 0 ifTrue: [ 0 ] ifFalse: [ 1 + (self mutualA: n - 1) ]

Corpus>>mutualChain: n
	| m |
	m := n \\ 24.
	m < 0 ifTrue: [ m := 0 - m ].
	^ self mutualA: m

Corpus>>clampedVia: a
	^ self clamp: a lo: 0 hi: 100

Corpus>>printAndReturn: x
	self callVMFunction: #printOop withArguments: {x}.
	^ x

Corpus>>printSum: x
	| r |
	r := self callVMFunction: #printOop withArguments: {x}.
	self callVMFunction: #printOop withArguments: {x + 1}.
	^ r + x

Corpus>>allocAligned: x
	| p |
	p := self callVMFunction: #primitiveNew withArguments: {}.
	^ (p bitAnd: 7) + ((p wordAt: 1) * 2) + (x bitAnd: 0)

Corpus>>allocReadsNil: x
	| p |
	p := self callVMFunction: #primitiveNew withArguments: {}.
	^ (p wordAt: 2) = nil

Corpus>>storeFetch: x
	| p |
	p := self callVMFunction: #primitiveNew withArguments: {}.
	p wordAt: 2 put: x.
	^ (p wordAt: 2) bitXor: x

Corpus>>stackEcho: x
	^ (self stackAt: 0) bitXor: x

Corpus>>charCode
	^ $a

Corpus>>literalChain
	^ ((1 + 2) * 3 - 4) bitShift: 2
"#;

/// Shape of the arguments one corpus method expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgShape {
    /// Free 64-bit words.
    Words(usize),
    /// Free words, but the receiver must be a class object (the method
    /// allocates through `primitiveNew`).
    ClassReceiver(usize),
}

pub struct CorpusEntry {
    pub selector: &'static str,
    pub category: &'static str,
    pub shape: ArgShape,
}

pub const CORPUS: &[CorpusEntry] = &[
    CorpusEntry { selector: "addTwo:with:", category: "arithmetic", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "subMul:with:", category: "arithmetic", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "divMod:with:", category: "arithmetic", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "negate:", category: "arithmetic", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "polynomial:", category: "arithmetic", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "ratio:with:and:", category: "arithmetic", shape: ArgShape::Words(3) },
    CorpusEntry { selector: "maskLow:", category: "bits", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "combine:with:", category: "bits", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "shiftLeftThree:", category: "bits", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "shiftRightLogical:", category: "bits", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "shiftRightSigned:", category: "bits", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "dynamicShift:by:", category: "bits", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "parity:", category: "bits", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "maxOf:with:", category: "control", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "signOf:", category: "control", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "absOf:", category: "control", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "clamp:lo:hi:", category: "control", shape: ArgShape::Words(3) },
    CorpusEntry { selector: "bothPositive:and:", category: "control", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "notEqual:to:", category: "nested-sends", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "whileSum:", category: "control", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "countdown:", category: "control", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "sumTo:", category: "control", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "nestedLoop:", category: "control", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "earlyExit:", category: "control", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "accumulate:", category: "blocks", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "outerProduct:with:", category: "blocks", shape: ArgShape::Words(2) },
    CorpusEntry { selector: "shadow:", category: "blocks", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "quadruple:", category: "internal-calls", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "fibWrap:", category: "internal-calls", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "mutualChain:", category: "internal-calls", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "clampedVia:", category: "internal-calls", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "printAndReturn:", category: "vm-calls", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "printSum:", category: "vm-calls", shape: ArgShape::Words(1) },
    CorpusEntry {
        selector: "allocAligned:",
        category: "vm-calls",
        shape: ArgShape::ClassReceiver(1),
    },
    CorpusEntry {
        selector: "allocReadsNil:",
        category: "vm-calls",
        shape: ArgShape::ClassReceiver(1),
    },
    CorpusEntry {
        selector: "storeFetch:",
        category: "vm-calls",
        shape: ArgShape::ClassReceiver(1),
    },
    CorpusEntry { selector: "stackEcho:", category: "vm-calls", shape: ArgShape::Words(1) },
    CorpusEntry { selector: "charCode", category: "nested-sends", shape: ArgShape::Words(0) },
    CorpusEntry { selector: "literalChain", category: "nested-sends", shape: ArgShape::Words(0) },
];

/// Load the corpus bundle into a VM.
pub fn load_corpus(vm: &mut Vm) {
    vm.load_bundle(EQUIVALENCE_BUNDLE, "Corpus").expect("corpus bundle loads");
}

/// Receiver of a corpus call. Class receivers are symbolic: a moving
/// collection can relocate the class object between runs, so the address
/// must be re-read from its global cell immediately before each call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    Word(u64),
    Class(&'static str),
}

impl Receiver {
    pub fn resolve(self, vm: &Vm) -> u64 {
        match self {
            Receiver::Word(w) => w,
            Receiver::Class(name) => vm.global_word(name).expect("class global"),
        }
    }
}

/// Receiver and argument words for one evaluation of `entry`.
pub fn sample_call(entry: &CorpusEntry, rng: &mut Lcg) -> (Receiver, Vec<u64>) {
    let (receiver, arity) = match entry.shape {
        ArgShape::Words(n) => (Receiver::Word(0), n),
        ArgShape::ClassReceiver(n) => (Receiver::Class("Point"), n),
    };
    let args = (0..arity)
        .map(|_| match rng.below(10) {
            // mostly small values, some full-width words, the odd zero
            0 => 0u64,
            1..=6 => rng.below(2000) as i64 as u64,
            7 => (rng.below(2000) as i64).wrapping_neg() as u64,
            _ => rng.next_u64(),
        })
        .collect();
    (receiver, args)
}

/// Backend result collapsed to a comparable outcome: a word, a primitive
/// failure (division by zero surfaces that way natively), or an
/// unexpected error that should fail the suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Word(u64),
    Failed,
    Error(String),
}

pub fn run_outcome(
    vm: &mut Vm,
    selector: &str,
    receiver: Receiver,
    args: &[u64],
    backend: Backend,
) -> Outcome {
    let receiver = receiver.resolve(vm);
    match vm.run_method(selector, receiver, args, backend) {
        Ok(word) => Outcome::Word(word),
        Err(RuntimeError::PrimitiveFailed { .. }) => Outcome::Failed,
        Err(RuntimeError::Eval(IrEvalError::DivisionByZero)) => Outcome::Failed,
        Err(other) => Outcome::Error(other.to_string()),
    }
}

/// True if the corpus still contains the receiver class for allocation
/// entries (sanity check used by suites before running).
pub fn corpus_ready(vm: &Vm) -> bool {
    vm.class_oop("Point").is_some()
}

#[allow(unused)]
fn _uses(_: Oop) {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_large_and_diverse() {
        assert!(CORPUS.len() >= 30, "corpus has {} methods", CORPUS.len());
        let categories: std::collections::BTreeSet<&str> =
            CORPUS.iter().map(|e| e.category).collect();
        for required in
            ["arithmetic", "bits", "nested-sends", "control", "blocks", "internal-calls", "vm-calls"]
        {
            assert!(categories.contains(required), "missing category {required}");
        }
    }

    #[test]
    fn bundle_loads_and_covers_corpus() {
        let mut vm = Vm::default();
        load_corpus(&mut vm);
        for entry in CORPUS {
            assert!(
                vm.method_table.method(entry.selector).is_some(),
                "missing {}",
                entry.selector
            );
        }
    }

    #[test]
    fn lcg_is_deterministic() {
        let mut a = Lcg::new(42);
        let mut b = Lcg::new(42);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
