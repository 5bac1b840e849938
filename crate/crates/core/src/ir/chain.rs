//! Converter chain: the compilation pipeline as an ordered list of
//! representation-to-representation transformations. Kinds are checked at
//! construction so a misordered chain fails before anything runs.

use crate::codegen::NativeArtifact;
use crate::frontend::{MethodNode, SourceMethod};
use crate::ir::IrFunction;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReprKind {
    Source,
    Ast,
    TypedAst,
    Tac,
    Ssa,
    Native,
}

impl fmt::Display for ReprKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ReprKind::Source => "source",
            ReprKind::Ast => "ast",
            ReprKind::TypedAst => "typed-ast",
            ReprKind::Tac => "tac",
            ReprKind::Ssa => "ssa",
            ReprKind::Native => "native",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone)]
pub enum Repr {
    Source(SourceMethod),
    Ast(MethodNode),
    TypedAst(MethodNode),
    Tac(IrFunction),
    Ssa(IrFunction),
    Native(NativeArtifact),
}

impl Repr {
    pub fn kind(&self) -> ReprKind {
        match self {
            Repr::Source(_) => ReprKind::Source,
            Repr::Ast(_) => ReprKind::Ast,
            Repr::TypedAst(_) => ReprKind::TypedAst,
            Repr::Tac(_) => ReprKind::Tac,
            Repr::Ssa(_) => ReprKind::Ssa,
            Repr::Native(_) => ReprKind::Native,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StageError {
    #[error("converter '{stage}' failed: {message}")]
    Failed { stage: String, message: String },
    #[error("chain kind mismatch: '{stage}' expects {expected} but would receive {found}")]
    KindMismatch { stage: String, expected: ReprKind, found: ReprKind },
}

type ConvertFn = Box<dyn FnMut(Repr) -> Result<Repr, String>>;

pub struct Converter {
    pub name: String,
    pub input: ReprKind,
    pub output: ReprKind,
    convert: ConvertFn,
}

impl Converter {
    pub fn new(
        name: &str,
        input: ReprKind,
        output: ReprKind,
        convert: impl FnMut(Repr) -> Result<Repr, String> + 'static,
    ) -> Self {
        Converter { name: name.to_string(), input, output, convert: Box::new(convert) }
    }
}

impl fmt::Debug for Converter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Converter({} : {} -> {})", self.name, self.input, self.output)
    }
}

#[derive(Debug, Default)]
pub struct ConverterChain {
    converters: Vec<Converter>,
}

impl ConverterChain {
    /// Build a chain, verifying that each converter's output kind equals
    /// the next one's input kind.
    pub fn new(converters: Vec<Converter>) -> Result<Self, StageError> {
        for pair in converters.windows(2) {
            if pair[0].output != pair[1].input {
                return Err(StageError::KindMismatch {
                    stage: pair[1].name.clone(),
                    expected: pair[1].input,
                    found: pair[0].output,
                });
            }
        }
        Ok(ConverterChain { converters })
    }

    pub fn stages(&self) -> impl Iterator<Item = &str> {
        self.converters.iter().map(|c| c.name.as_str())
    }

    /// Apply every converter in order. The empty chain is the identity.
    pub fn run(&mut self, input: Repr) -> Result<Repr, StageError> {
        if let Some(first) = self.converters.first() {
            if first.input != input.kind() {
                return Err(StageError::KindMismatch {
                    stage: first.name.clone(),
                    expected: first.input,
                    found: input.kind(),
                });
            }
        }
        let mut value = input;
        for converter in &mut self.converters {
            value = (converter.convert)(value).map_err(|message| StageError::Failed {
                stage: converter.name.clone(),
                message,
            })?;
            debug_assert_eq!(value.kind(), converter.output, "converter output kind drifted");
        }
        Ok(value)
    }
}

/// The standard frontend converters. Lowering and emission depend on VM
/// state, so their converters are built where that state lives.
pub mod standard {
    use super::*;
    use crate::frontend;

    pub fn purifier() -> Converter {
        Converter::new("purify", ReprKind::Source, ReprKind::Source, |repr| match repr {
            Repr::Source(mut src) => {
                src.source = frontend::purify(&src.source).map_err(|e| e.to_string())?;
                Ok(Repr::Source(src))
            }
            _ => unreachable!("kind-checked"),
        })
    }

    pub fn parser() -> Converter {
        Converter::new("parse", ReprKind::Source, ReprKind::Ast, |repr| match repr {
            Repr::Source(src) => {
                let ast = frontend::parse_method(&src).map_err(|e| e.to_string())?;
                Ok(Repr::Ast(ast))
            }
            _ => unreachable!("kind-checked"),
        })
    }

    pub fn annotator() -> Converter {
        Converter::new("annotate", ReprKind::Ast, ReprKind::TypedAst, |repr| match repr {
            Repr::Ast(ast) => {
                let typed = frontend::annotate_types(&ast).map_err(|e| e.to_string())?;
                Ok(Repr::TypedAst(typed))
            }
            _ => unreachable!("kind-checked"),
        })
    }

    pub fn ssa_converter() -> Converter {
        Converter::new("to_ssa", ReprKind::Tac, ReprKind::Ssa, |repr| match repr {
            Repr::Tac(f) => Ok(Repr::Ssa(crate::ir::to_ssa(&f))),
            _ => unreachable!("kind-checked"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::standard::*;
    use super::*;
    use crate::ir::lower::{lower, LowerEnv};
    use crate::reachability::MethodTable;

    fn lowerer() -> Converter {
        Converter::new("lower", ReprKind::TypedAst, ReprKind::Tac, move |repr| match repr {
            Repr::TypedAst(ast) => {
                let f = lower(&ast, &MethodTable::new(), &mut LowerEnv::default())
                    .map_err(|e| e.to_string())?;
                Ok(Repr::Tac(f))
            }
            _ => unreachable!(),
        })
    }

    #[test]
    fn parse_annotate_lower_on_literal_method() {
        let mut chain =
            ConverterChain::new(vec![purifier(), parser(), annotator(), lowerer()]).unwrap();
        let out = chain
            .run(Repr::Source(SourceMethod::new("T", "", "one ^ 1")))
            .unwrap();
        match out {
            Repr::Tac(f) => {
                assert!(matches!(
                    f.blocks[0].terminator,
                    crate::ir::Terminator::Ret(crate::ir::Operand::Imm(1))
                ));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn empty_chain_is_identity() {
        let mut chain = ConverterChain::new(vec![]).unwrap();
        let input = Repr::Source(SourceMethod::new("T", "", "one ^ 1"));
        let out = chain.run(input.clone()).unwrap();
        match (input, out) {
            (Repr::Source(a), Repr::Source(b)) => assert_eq!(a, b),
            _ => panic!("kind changed"),
        }
    }

    #[test]
    fn misordered_chain_rejected_at_construction() {
        let err = ConverterChain::new(vec![lowerer(), parser()]).unwrap_err();
        assert!(matches!(err, StageError::KindMismatch { .. }));
    }

    #[test]
    fn stage_identity_attached_to_failures() {
        let mut chain = ConverterChain::new(vec![parser()]).unwrap();
        let err = chain
            .run(Repr::Source(SourceMethod::new("T", "", "broken ^ ^")))
            .unwrap_err();
        match err {
            StageError::Failed { stage, .. } => assert_eq!(stage, "parse"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn input_kind_checked_at_run() {
        let mut chain = ConverterChain::new(vec![annotator()]).unwrap();
        let err = chain
            .run(Repr::Source(SourceMethod::new("T", "", "one ^ 1")))
            .unwrap_err();
        assert!(matches!(err, StageError::KindMismatch { .. }));
    }
}
