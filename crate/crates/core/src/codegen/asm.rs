//! Minimal x86-64 instruction emitter: machine bytes plus a parallel
//! mnemonic listing for the `dump-asm` output. Only 64-bit operand forms
//! are provided; memory addressing is always base + disp32 (or SIB with a
//! scale of 8) so encodings stay uniform and byte-deterministic.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(dead_code)]
pub enum Reg {
    Rax = 0,
    Rcx = 1,
    Rdx = 2,
    Rbx = 3,
    Rsp = 4,
    Rbp = 5,
    Rsi = 6,
    Rdi = 7,
    R8 = 8,
    R9 = 9,
    R10 = 10,
    R11 = 11,
    R12 = 12,
    R13 = 13,
    R14 = 14,
    R15 = 15,
}

impl Reg {
    fn low3(self) -> u8 {
        (self as u8) & 0x7
    }

    fn ext(self) -> bool {
        (self as u8) >= 8
    }

    pub fn name(self) -> &'static str {
        match self {
            Reg::Rax => "rax",
            Reg::Rcx => "rcx",
            Reg::Rdx => "rdx",
            Reg::Rbx => "rbx",
            Reg::Rsp => "rsp",
            Reg::Rbp => "rbp",
            Reg::Rsi => "rsi",
            Reg::Rdi => "rdi",
            Reg::R8 => "r8",
            Reg::R9 => "r9",
            Reg::R10 => "r10",
            Reg::R11 => "r11",
            Reg::R12 => "r12",
            Reg::R13 => "r13",
            Reg::R14 => "r14",
            Reg::R15 => "r15",
        }
    }
}

/// System-V argument registers, in order.
pub const SYSV_ARG_REGS: [Reg; 6] = [Reg::Rdi, Reg::Rsi, Reg::Rdx, Reg::Rcx, Reg::R8, Reg::R9];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cond {
    Eq,
    Ne,
    Lt,
    Le,
}

impl Cond {
    fn setcc_opcode(self) -> u8 {
        match self {
            Cond::Eq => 0x94,
            Cond::Ne => 0x95,
            Cond::Lt => 0x9C,
            Cond::Le => 0x9E,
        }
    }

    fn jcc_opcode(self) -> u8 {
        match self {
            Cond::Eq => 0x84,
            Cond::Ne => 0x85,
            Cond::Lt => 0x8C,
            Cond::Le => 0x8E,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Cond::Eq => "e",
            Cond::Ne => "ne",
            Cond::Lt => "l",
            Cond::Le => "le",
        }
    }
}

#[derive(Debug, Default)]
pub struct Asm {
    code: Vec<u8>,
    listing: Vec<String>,
}

fn disp_str(disp: i32) -> String {
    if disp >= 0 {
        format!("+{disp}")
    } else {
        format!("-{}", -disp)
    }
}

impl Asm {
    pub fn new() -> Self {
        Asm::default()
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn into_parts(self) -> (Vec<u8>, Vec<String>) {
        (self.code, self.listing)
    }

    pub fn code(&self) -> &[u8] {
        &self.code
    }

    pub fn listing(&self) -> &[String] {
        &self.listing
    }

    pub fn note(&mut self, text: &str) {
        self.listing.push(format!("; {text}"));
    }

    fn rex(&mut self, reg: Option<Reg>, index: Option<Reg>, rm: Reg) {
        let mut rex = 0x48u8; // REX.W
        if reg.is_some_and(|r| r.ext()) {
            rex |= 0x4;
        }
        if index.is_some_and(|r| r.ext()) {
            rex |= 0x2;
        }
        if rm.ext() {
            rex |= 0x1;
        }
        self.code.push(rex);
    }

    fn modrm(&mut self, mode: u8, reg: u8, rm: u8) {
        self.code.push((mode << 6) | ((reg & 7) << 3) | (rm & 7));
    }

    fn imm32(&mut self, v: i32) {
        self.code.extend_from_slice(&v.to_le_bytes());
    }

    /// modrm+disp32 for `[base + disp]`; uses a SIB byte when the base
    /// demands one.
    fn mem_base(&mut self, reg: Reg, base: Reg, disp: i32) {
        if base.low3() == 4 {
            // rsp/r12 need a SIB byte with no index
            self.modrm(0b10, reg.low3(), 0b100);
            self.code.push((0b100 << 3) | base.low3());
        } else {
            self.modrm(0b10, reg.low3(), base.low3());
        }
        self.imm32(disp);
    }

    // ── moves ───────────────────────────────────────────────────────────

    pub fn mov_reg_reg(&mut self, dst: Reg, src: Reg) {
        self.rex(Some(src), None, dst);
        self.code.push(0x89);
        self.modrm(0b11, src.low3(), dst.low3());
        self.listing.push(format!("mov {}, {}", dst.name(), src.name()));
    }

    /// `mov dst, imm` — sign-extended 32-bit form when the value fits.
    pub fn mov_reg_imm(&mut self, dst: Reg, value: i64) {
        if let Ok(v) = i32::try_from(value) {
            self.rex(None, None, dst);
            self.code.push(0xC7);
            self.modrm(0b11, 0, dst.low3());
            self.imm32(v);
            self.listing.push(format!("mov {}, {v}", dst.name()));
        } else {
            self.mov_reg_imm64(dst, value as u64, &value.to_string());
        }
    }

    /// `movabs dst, imm64`; returns the offset of the imm64 payload so a
    /// relocation can patch it. `note` is the listing operand text.
    pub fn mov_reg_imm64(&mut self, dst: Reg, value: u64, note: &str) -> usize {
        self.rex(None, None, dst);
        self.code.push(0xB8 + dst.low3());
        let at = self.code.len();
        self.code.extend_from_slice(&value.to_le_bytes());
        self.listing.push(format!("movabs {}, {note}", dst.name()));
        at
    }

    pub fn mov_reg_mem(&mut self, dst: Reg, base: Reg, disp: i32) {
        self.rex(Some(dst), None, base);
        self.code.push(0x8B);
        self.mem_base(dst, base, disp);
        self.listing.push(format!("mov {}, [{}{}]", dst.name(), base.name(), disp_str(disp)));
    }

    pub fn mov_mem_reg(&mut self, base: Reg, disp: i32, src: Reg) {
        self.rex(Some(src), None, base);
        self.code.push(0x89);
        self.mem_base(src, base, disp);
        self.listing.push(format!("mov [{}{}], {}", base.name(), disp_str(disp), src.name()));
    }

    /// `mov qword [base+disp], imm32` (sign-extended).
    pub fn mov_mem_imm32(&mut self, base: Reg, disp: i32, value: i32) {
        self.rex(None, None, base);
        self.code.push(0xC7);
        self.mem_base(Reg::Rax, base, disp); // reg field = /0
        // mem_base encoded reg from Rax (0), which is the required /0
        self.imm32(value);
        self.listing.push(format!("mov qword [{}{}], {value}", base.name(), disp_str(disp)));
    }

    /// `mov dst, [base + index*8 + disp]`
    pub fn mov_reg_mem_indexed(&mut self, dst: Reg, base: Reg, index: Reg) {
        assert!(index.low3() != 4, "rsp cannot index");
        self.rex(Some(dst), Some(index), base);
        self.code.push(0x8B);
        self.modrm(0b10, dst.low3(), 0b100);
        self.code.push((0b11 << 6) | (index.low3() << 3) | base.low3());
        self.imm32(0);
        self.listing.push(format!("mov {}, [{}+{}*8]", dst.name(), base.name(), index.name()));
    }

    /// `mov [base + index*8 + disp], src`
    pub fn mov_mem_indexed_reg(&mut self, base: Reg, index: Reg, src: Reg) {
        assert!(index.low3() != 4, "rsp cannot index");
        self.rex(Some(src), Some(index), base);
        self.code.push(0x89);
        self.modrm(0b10, src.low3(), 0b100);
        self.code.push((0b11 << 6) | (index.low3() << 3) | base.low3());
        self.imm32(0);
        self.listing.push(format!("mov [{}+{}*8], {}", base.name(), index.name(), src.name()));
    }

    // ── arithmetic / logic (reg, reg forms) ─────────────────────────────

    fn alu_reg_reg(&mut self, opcode: u8, mnemonic: &str, dst: Reg, src: Reg) {
        self.rex(Some(src), None, dst);
        self.code.push(opcode);
        self.modrm(0b11, src.low3(), dst.low3());
        self.listing.push(format!("{mnemonic} {}, {}", dst.name(), src.name()));
    }

    pub fn add_reg_reg(&mut self, dst: Reg, src: Reg) {
        self.alu_reg_reg(0x01, "add", dst, src);
    }

    pub fn sub_reg_reg(&mut self, dst: Reg, src: Reg) {
        self.alu_reg_reg(0x29, "sub", dst, src);
    }

    pub fn and_reg_reg(&mut self, dst: Reg, src: Reg) {
        self.alu_reg_reg(0x21, "and", dst, src);
    }

    pub fn or_reg_reg(&mut self, dst: Reg, src: Reg) {
        self.alu_reg_reg(0x09, "or", dst, src);
    }

    pub fn xor_reg_reg(&mut self, dst: Reg, src: Reg) {
        self.alu_reg_reg(0x31, "xor", dst, src);
    }

    pub fn cmp_reg_reg(&mut self, a: Reg, b: Reg) {
        self.alu_reg_reg(0x39, "cmp", a, b);
    }

    pub fn test_reg_reg(&mut self, a: Reg, b: Reg) {
        self.alu_reg_reg(0x85, "test", a, b);
    }

    pub fn imul_reg_reg(&mut self, dst: Reg, src: Reg) {
        self.rex(Some(dst), None, src);
        self.code.extend_from_slice(&[0x0F, 0xAF]);
        self.modrm(0b11, dst.low3(), src.low3());
        self.listing.push(format!("imul {}, {}", dst.name(), src.name()));
    }

    pub fn cmp_reg_imm8(&mut self, reg: Reg, value: i8) {
        self.rex(None, None, reg);
        self.code.push(0x83);
        self.modrm(0b11, 7, reg.low3());
        self.code.push(value as u8);
        self.listing.push(format!("cmp {}, {value}", reg.name()));
    }

    pub fn cqo(&mut self) {
        self.code.extend_from_slice(&[0x48, 0x99]);
        self.listing.push("cqo".to_string());
    }

    pub fn idiv_reg(&mut self, divisor: Reg) {
        self.rex(None, None, divisor);
        self.code.push(0xF7);
        self.modrm(0b11, 7, divisor.low3());
        self.listing.push(format!("idiv {}", divisor.name()));
    }

    fn shift_cl(&mut self, ext: u8, mnemonic: &str, reg: Reg) {
        self.rex(None, None, reg);
        self.code.push(0xD3);
        self.modrm(0b11, ext, reg.low3());
        self.listing.push(format!("{mnemonic} {}, cl", reg.name()));
    }

    pub fn shl_cl(&mut self, reg: Reg) {
        self.shift_cl(4, "shl", reg);
    }

    pub fn shr_cl(&mut self, reg: Reg) {
        self.shift_cl(5, "shr", reg);
    }

    pub fn sar_cl(&mut self, reg: Reg) {
        self.shift_cl(7, "sar", reg);
    }

    /// `setcc al; movzx rax, al` — materialize a comparison into rax.
    pub fn setcc_rax(&mut self, cond: Cond) {
        self.code.extend_from_slice(&[0x0F, cond.setcc_opcode(), 0xC0]);
        self.code.extend_from_slice(&[0x48, 0x0F, 0xB6, 0xC0]);
        self.listing.push(format!("set{} al", cond.name()));
        self.listing.push("movzx rax, al".to_string());
    }

    // ── stack / frame ───────────────────────────────────────────────────

    pub fn push_reg(&mut self, reg: Reg) {
        if reg.ext() {
            self.code.push(0x41);
        }
        self.code.push(0x50 + reg.low3());
        self.listing.push(format!("push {}", reg.name()));
    }

    pub fn pop_reg(&mut self, reg: Reg) {
        if reg.ext() {
            self.code.push(0x41);
        }
        self.code.push(0x58 + reg.low3());
        self.listing.push(format!("pop {}", reg.name()));
    }

    pub fn sub_rsp_imm32(&mut self, bytes: i32) {
        self.code.extend_from_slice(&[0x48, 0x81, 0xEC]);
        self.imm32(bytes);
        self.listing.push(format!("sub rsp, {bytes}"));
    }

    pub fn add_rsp_imm32(&mut self, bytes: i32) {
        self.code.extend_from_slice(&[0x48, 0x81, 0xC4]);
        self.imm32(bytes);
        self.listing.push(format!("add rsp, {bytes}"));
    }

    pub fn and_rsp_imm8(&mut self, mask: i8) {
        self.code.extend_from_slice(&[0x48, 0x83, 0xE4, mask as u8]);
        self.listing.push(format!("and rsp, {mask}"));
    }

    // ── control flow ────────────────────────────────────────────────────

    /// `jmp rel32` with a placeholder; returns the offset of the rel32.
    pub fn jmp_rel32(&mut self, label: &str) -> usize {
        self.code.push(0xE9);
        let at = self.code.len();
        self.imm32(0);
        self.listing.push(format!("jmp {label}"));
        at
    }

    /// `jcc rel32` with a placeholder; returns the offset of the rel32.
    pub fn jcc_rel32(&mut self, cond: Cond, label: &str) -> usize {
        self.code.extend_from_slice(&[0x0F, cond.jcc_opcode()]);
        let at = self.code.len();
        self.imm32(0);
        self.listing.push(format!("j{} {label}", cond.name()));
        at
    }

    /// `call rel32` with a placeholder; returns the offset of the rel32.
    pub fn call_rel32(&mut self, label: &str) -> usize {
        self.code.push(0xE8);
        let at = self.code.len();
        self.imm32(0);
        self.listing.push(format!("call {label}"));
        at
    }

    pub fn call_reg(&mut self, reg: Reg) {
        if reg.ext() {
            self.code.push(0x41);
        }
        self.code.push(0xFF);
        self.modrm(0b11, 2, reg.low3());
        self.listing.push(format!("call {}", reg.name()));
    }

    pub fn ret(&mut self) {
        self.code.push(0xC3);
        self.listing.push("ret".to_string());
    }

    /// Patch a rel32 placeholder so control lands on `target` (an offset
    /// within this buffer).
    pub fn patch_rel32(&mut self, at: usize, target: usize) {
        let rel = target as i64 - (at as i64 + 4);
        let rel = i32::try_from(rel).expect("jump distance fits rel32");
        self.code[at..at + 4].copy_from_slice(&rel.to_le_bytes());
    }
}
