//! Emission-level checks: determinism, relocation records, placeholder
//! hygiene, calling-convention separation and executable template
//! fragments, without going through the full VM.

mod common;

use cascade_core::codegen::{
    apply_relocations, emit_artifact, emit_native, inline_template, layout_frames, CodegenError,
    PrimitiveTemplate, RelocKind, TemplateOperand, PLACEHOLDER_BYTE, PRIMITIVE_FAILURE_WORD,
};
use cascade_core::ir::interp::EmptyEnv;
use cascade_core::ir::{interpret_ir, to_ssa, IrEvalError, DEFAULT_STEP_BUDGET};
use cascade_core::runtime::PinnedArgSlot;
use cascade_core::selectors::TemplateKind;

fn ssa_of(src: &str) -> cascade_core::ir::IrFunction {
    to_ssa(&common::lower_source(src))
}

#[test]
fn emission_is_deterministic() {
    let f = ssa_of("mix: a with: b | t | t := a * b. t > 0 ifTrue: [ t := t + 1 ]. ^ t");
    let ctx = layout_frames(&f);
    let a = emit_artifact(&[(f.clone(), ctx.clone())], 0).unwrap();
    let b = emit_artifact(&[(f, ctx)], 0).unwrap();
    assert_eq!(a.code, b.code, "byte-identical artifacts");
    assert_eq!(a.listing, b.listing, "stable listing");
    assert_eq!(a.relocations, b.relocations);
}

#[test]
fn vm_call_produces_exactly_one_symbol_record() {
    let f = ssa_of("p: x self callVMFunction: #printOop withArguments: {x}. ^ x");
    let ctx = layout_frames(&f);
    let mut artifact = emit_artifact(&[(f, ctx)], 0).unwrap();
    let printoop_records: Vec<_> = artifact
        .relocations
        .iter()
        .filter(|r| r.symbol == "printOop")
        .collect();
    assert_eq!(printoop_records.len(), 1);
    assert_eq!(printoop_records[0].kind, RelocKind::Absolute64);
    assert!(!printoop_records[0].patched);
    assert_eq!(
        artifact.relocations.iter().filter(|r| !r.patched).count(),
        artifact.relocations.iter().filter(|r| r.kind == RelocKind::Absolute64).count()
    );

    apply_relocations(&mut artifact, &|name| match name {
        "printOop" => Some(0x1000),
        "vm_arg_slot" => Some(0x2000),
        _ => None,
    })
    .unwrap();
    assert_eq!(artifact.unpatched_count(), 0, "zero after patching");
    assert!(artifact.placeholder_scan().is_empty(), "no placeholder bytes remain");
}

#[test]
fn missing_symbol_is_an_error() {
    let f = ssa_of("p: x self callVMFunction: #printOop withArguments: {x}. ^ x");
    let ctx = layout_frames(&f);
    let err = emit_native(&f, &ctx, &|_| None).unwrap_err();
    assert!(matches!(err, CodegenError::UnresolvedSymbol(_)));
}

#[test]
fn placeholder_bytes_present_before_patching() {
    let f = ssa_of("answer ^ 42");
    let ctx = layout_frames(&f);
    let artifact = emit_artifact(&[(f, ctx)], 0).unwrap();
    // the shim's slot reads are the only absolute references here
    assert!(artifact
        .relocations
        .iter()
        .filter(|r| r.kind == RelocKind::Absolute64)
        .all(|r| r.symbol == "vm_arg_slot"));
    assert!(!artifact.placeholder_scan().is_empty());
    assert!(artifact.code.windows(8).any(|w| w == [PLACEHOLDER_BYTE; 8]));
}

#[test]
fn tac_input_is_rejected() {
    let f = common::lower_source("answer ^ 1");
    let ctx = layout_frames(&f);
    assert!(matches!(
        emit_artifact(&[(f, ctx)], 0),
        Err(CodegenError::NotInSsaForm)
    ));
}

#[test]
fn listing_shows_both_conventions() {
    let helper = to_ssa(&common::lower_with_table("helper: x ^ x + 1", &[]));
    let main = to_ssa(&common::lower_with_table(
        "go: x self callVMFunction: #printOop withArguments: {x}. ^ self helper: x",
        &["helper: x ^ x + 1"],
    ));
    let artifact = emit_artifact(
        &[(main.clone(), layout_frames(&main)), (helper.clone(), layout_frames(&helper))],
        0,
    )
    .unwrap();
    let listing = artifact.dump_listing();
    // internal convention: receiver copied from [rbp+16]
    assert!(listing.contains("mov rax, [rbp+16]"), "{listing}");
    // C convention: argument register and dynamic realignment
    assert!(listing.contains("mov rdi,"), "{listing}");
    assert!(listing.contains("and rsp, -16"), "{listing}");
    // intra-artifact call resolved as a relative record
    assert!(artifact
        .relocations
        .iter()
        .any(|r| r.kind == RelocKind::Relative32 && r.symbol == "helper:" && r.patched));
}

// ── executable checks (native hardware only) ────────────────────────────

#[cfg(all(target_arch = "x86_64", unix))]
mod native {
    use super::*;
    use cascade_core::runtime::ExecRegion;

    /// Run one artifact through a private pinned slot.
    fn activate(artifact_code: &[u8], slot: &PinnedArgSlot) -> u64 {
        let _ = slot;
        let region = ExecRegion::load(artifact_code).unwrap();
        let entry: extern "C" fn() -> u64 = unsafe { std::mem::transmute(region.address()) };
        entry()
    }

    fn compile_and_run(src: &str, extra: &[&str], receiver: u64, args: &[u64]) -> u64 {
        let mut functions = vec![{
            let f = to_ssa(&common::lower_with_table(src, extra));
            let ctx = layout_frames(&f);
            (f, ctx)
        }];
        for other in extra {
            let f = to_ssa(&common::lower_with_table(other, extra));
            let ctx = layout_frames(&f);
            functions.push((f, ctx));
        }
        let mut artifact = emit_artifact(&functions, 0).unwrap();
        let mut slot = PinnedArgSlot::new();
        slot.receiver = receiver;
        slot.arg_count = args.len() as u64;
        slot.args[..args.len()].copy_from_slice(args);
        let slot_base = slot.base_address();
        apply_relocations(&mut artifact, &|name| match name {
            "vm_arg_slot" => Some(slot_base),
            "printOop" => Some(canary_print as extern "C" fn(u64) -> u64 as usize as u64),
            _ => None,
        })
        .unwrap();
        activate(&artifact.code, &slot)
    }

    /// Stand-in for a VM function that trashes every caller-saved register
    /// the C convention lets it trash.
    extern "C" fn canary_print(_oop: u64) -> u64 {
        unsafe {
            std::arch::asm!(
                "nop",
                out("rcx") _, out("rdx") _, out("rsi") _, out("rdi") _,
                out("r8") _, out("r9") _, out("r10") _, out("r11") _,
                options(nostack),
            );
        }
        0
    }

    #[test]
    fn emitted_add_matches_the_ir_oracle_on_random_vectors() {
        let src = "blend: a with: b ^ (a + b) * (a bitXor: b)";
        let f = to_ssa(&common::lower_source(src));
        let mut rng = cascade_core::corpus::Lcg::new(7);
        for _ in 0..200 {
            let a = rng.next_u64();
            let b = rng.next_u64();
            let expected =
                interpret_ir(&f, &[0, a, b], &mut EmptyEnv, DEFAULT_STEP_BUDGET).unwrap();
            let got = compile_and_run(src, &[], 0, &[a, b]);
            assert_eq!(got, expected, "a={a:#x} b={b:#x}");
        }
    }

    #[test]
    fn values_survive_a_register_clobbering_vm_call() {
        // locals computed before the call must be reloaded from frame
        // slots afterwards, whatever the callee did to scratch registers
        let src = "canary: a with: b | x y | x := a * 3. y := b + 7. \
                   self callVMFunction: #printOop withArguments: {x}. ^ x + y";
        let f = to_ssa(&common::lower_with_table(src, &[]));
        let mut rng = cascade_core::corpus::Lcg::new(99);
        for _ in 0..100 {
            let a = rng.next_u64();
            let b = rng.next_u64();
            let expected = a.wrapping_mul(3).wrapping_add(b.wrapping_add(7));
            let got = compile_and_run(src, &[], 0, &[a, b]);
            assert_eq!(got, expected, "a={a:#x} b={b:#x}");
        }
        let _ = f;
    }

    #[test]
    fn internal_call_reads_receiver_below_arguments() {
        let extra = ["echoSelf: x ^ (self bitXor: x) bitXor: x"];
        let src = "probe: x ^ self echoSelf: x";
        // (recv ^ x) ^ x == recv: only correct if the callee's receiver
        // slot really carries the caller's receiver
        let got = compile_and_run(src, &extra, 0xAABB_CCDD, &[0x1234_5678]);
        assert_eq!(got, 0xAABB_CCDD);
    }

    #[test]
    fn division_by_zero_returns_the_failure_word() {
        let got = compile_and_run("d: a by: b ^ a // b", &[], 0, &[1, 0]);
        assert_eq!(got, PRIMITIVE_FAILURE_WORD);
        // matching the IR oracle's division error
        let f = to_ssa(&common::lower_source("d: a by: b ^ a // b"));
        assert_eq!(
            interpret_ir(&f, &[0, 1, 0], &mut EmptyEnv, DEFAULT_STEP_BUDGET),
            Err(IrEvalError::DivisionByZero)
        );
    }

    #[test]
    fn nested_failure_propagates_to_the_activation_boundary() {
        let extra = ["half: x ^ 10 // x"];
        let got = compile_and_run("wrap: x ^ (self half: x) + 1", &extra, 0, &[0]);
        assert_eq!(got, PRIMITIVE_FAILURE_WORD, "callee failure unwinds the whole activation");
    }

    #[test]
    fn min_over_minus_one_wraps_like_the_interpreter() {
        let src = "d: a by: b ^ a // b";
        let f = to_ssa(&common::lower_source(src));
        let a = i64::MIN as u64;
        let b = (-1i64) as u64;
        let expected = interpret_ir(&f, &[0, a, b], &mut EmptyEnv, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(compile_and_run(src, &[], 0, &[a, b]), expected);
        let m = "m: a by: b ^ a \\\\ b";
        let fm = to_ssa(&common::lower_source(m));
        let expected = interpret_ir(&fm, &[0, a, b], &mut EmptyEnv, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(compile_and_run(m, &[], 0, &[a, b]), expected);
    }

    /// Wrap a standalone template fragment in a frame that loads the given
    /// slot values, then execute it.
    fn run_template_fragment(kind: TemplateKind, slots: &[u64], ops: &[TemplateOperand]) -> u64 {
        use cascade_core::codegen::{Asm, Reg};
        let fragment = inline_template(&PrimitiveTemplate::new(kind), ops).unwrap();
        let mut asm = Asm::new();
        asm.push_reg(Reg::Rbp);
        asm.mov_reg_reg(Reg::Rbp, Reg::Rsp);
        asm.sub_rsp_imm32(((slots.len() as i32 * 8) + 15) & !15);
        for (i, &value) in slots.iter().enumerate() {
            asm.mov_reg_imm64(Reg::Rcx, value, "slot");
            asm.mov_mem_reg(Reg::Rbp, -8 * (i as i32 + 1), Reg::Rcx);
        }
        let (mut code, _) = asm.into_parts();
        code.extend_from_slice(&fragment);
        let mut tail = Asm::new();
        tail.mov_reg_reg(Reg::Rsp, Reg::Rbp);
        tail.pop_reg(Reg::Rbp);
        tail.ret();
        code.extend_from_slice(tail.code());
        let region = ExecRegion::load(&code).unwrap();
        let f: extern "C" fn() -> u64 = unsafe { std::mem::transmute(region.address()) };
        f()
    }

    #[test]
    fn add_template_is_fixed_length_and_self_contained() {
        let ops = [TemplateOperand::Slot(0), TemplateOperand::Slot(1)];
        let a = inline_template(&PrimitiveTemplate::new(TemplateKind::Add), &ops).unwrap();
        let b = inline_template(&PrimitiveTemplate::new(TemplateKind::Add), &ops).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        assert!(
            !a.windows(8).any(|w| w == [PLACEHOLDER_BYTE; 8]),
            "templates carry no relocations"
        );
        assert_eq!(run_template_fragment(TemplateKind::Add, &[2, 3], &ops), 5);
    }

    #[test]
    fn negative_shift_template_shifts_right() {
        let ops = [TemplateOperand::Slot(0), TemplateOperand::Imm(-3)];
        let got = run_template_fragment(TemplateKind::BitShift, &[0x80], &ops);
        assert_eq!(got, 0x10);
    }

    #[test]
    fn division_template_traps_to_the_failure_exit() {
        let ops = [TemplateOperand::Slot(0), TemplateOperand::Slot(1)];
        assert_eq!(
            run_template_fragment(TemplateKind::Div, &[1, 0], &ops),
            PRIMITIVE_FAILURE_WORD
        );
        assert_eq!(run_template_fragment(TemplateKind::Div, &[42, 7], &ops), 6);
    }
}

#[test]
fn template_arity_is_checked() {
    let err = inline_template(
        &PrimitiveTemplate::new(TemplateKind::Add),
        &[TemplateOperand::Slot(0)],
    )
    .unwrap_err();
    assert!(matches!(err, CodegenError::ArityMismatch { expected: 2, found: 1 }));
}
