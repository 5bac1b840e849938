//! Recursive-descent parser producing [`MethodNode`]s.
//!
//! Grammar, loosely: a method is a selector pattern, then any number of
//! leading pragmas and at most one temporaries declaration, then statements
//! separated by periods. Message precedence is the usual unary > binary >
//! keyword. Brace arrays exist only as the `withArguments:` argument of the
//! VM-call construct.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::FrontendError;

pub fn parse_method(src: &SourceMethod) -> Result<MethodNode, FrontendError> {
    if src.source.trim().is_empty() {
        return Err(FrontendError::Parse {
            line: 1,
            column: 1,
            message: "empty method source".to_string(),
        });
    }
    let tokens = lex(&src.source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let method = parser.method()?;
    if !src.selector.is_empty() && src.selector != method.selector {
        return Err(FrontendError::Parse {
            line: 1,
            column: 1,
            message: format!(
                "method pattern declares #{} but the bundle names it #{}",
                method.selector, src.selector
            ),
        });
    }
    Ok(method)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

/// Parser-internal expression: brace arrays are only permitted in one
/// argument position and never become real AST nodes.
enum PExpr {
    Expr(ExprNode),
    Braces(Vec<ExprNode>),
}

impl PExpr {
    fn into_expr(self, parser: &Parser) -> Result<ExprNode, FrontendError> {
        match self {
            PExpr::Expr(e) => Ok(e),
            PExpr::Braces(_) => Err(parser.error(
                "brace arrays are only legal as the withArguments: argument of a VM call",
            )),
        }
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> FrontendError {
        let t = &self.tokens[self.pos.min(self.tokens.len() - 1)];
        FrontendError::Parse {
            line: t.line,
            column: t.column,
            message: message.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FrontendError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}, found {:?}", self.peek())))
        }
    }

    fn identifier(&mut self, what: &str) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Identifier(name) => {
                self.next();
                Ok(name)
            }
            _ => Err(self.error(&format!("expected {what}"))),
        }
    }

    // ── method structure ────────────────────────────────────────────────

    fn method(&mut self) -> Result<MethodNode, FrontendError> {
        let (selector, params) = self.pattern()?;
        let mut pragmas = Vec::new();
        let mut temps = Vec::new();
        let mut saw_temps = false;
        loop {
            match self.peek() {
                Tok::BinarySelector(op) if op == "<" && self.looks_like_pragma() => {
                    pragmas.push(self.pragma()?);
                }
                Tok::VBar if !saw_temps => {
                    temps = self.temp_decls()?;
                    saw_temps = true;
                }
                _ => break,
            }
        }
        let body = self.statements(&pragmas.is_empty())?;
        let mut seen = std::collections::HashSet::new();
        for name in params.iter().chain(temps.iter()) {
            if !seen.insert(name.clone()) {
                return Err(self.error(&format!("duplicate variable name '{name}'")));
            }
        }
        Ok(MethodNode { selector, params, pragmas, temps, body, var_types: Vec::new() })
    }

    fn pattern(&mut self) -> Result<(String, Vec<String>), FrontendError> {
        match self.peek().clone() {
            Tok::Keyword(_) => {
                let mut selector = String::new();
                let mut params = Vec::new();
                while let Tok::Keyword(kw) = self.peek().clone() {
                    self.next();
                    selector.push_str(&kw);
                    params.push(self.identifier("parameter name")?);
                }
                Ok((selector, params))
            }
            Tok::BinarySelector(op) => {
                self.next();
                let param = self.identifier("parameter name")?;
                Ok((op, vec![param]))
            }
            Tok::Identifier(name) => {
                self.next();
                Ok((name, Vec::new()))
            }
            _ => Err(self.error("expected method pattern")),
        }
    }

    fn looks_like_pragma(&self) -> bool {
        matches!(
            self.peek_at(1),
            Tok::Identifier(name) if name == "primitive"
        ) || matches!(self.peek_at(1), Tok::Keyword(kw) if kw == "var:")
    }

    fn pragma(&mut self) -> Result<PragmaNode, FrontendError> {
        self.next(); // '<'
        let node = match self.peek().clone() {
            Tok::Identifier(name) if name == "primitive" => {
                self.next();
                PragmaNode::Primitive
            }
            Tok::Keyword(kw) if kw == "var:" => {
                self.next();
                let var_name = self.symbol_literal("variable symbol after var:")?;
                self.expect(Tok::Keyword("type:".into()), "type: keyword")?;
                let type_name = self.symbol_literal("type symbol after type:")?;
                let basic_type = BasicType::from_pragma_name(&type_name).ok_or_else(|| {
                    self.error(&format!("unknown basic type #{type_name} in pragma"))
                })?;
                let mut by_reference = false;
                if matches!(self.peek(), Tok::Keyword(kw) if kw == "ref:") {
                    self.next();
                    match self.next() {
                        Tok::Identifier(b) if b == "true" => by_reference = true,
                        Tok::Identifier(b) if b == "false" => by_reference = false,
                        _ => return Err(self.error("expected true or false after ref:")),
                    }
                }
                PragmaNode::TypeAnnotation { var_name, basic_type, by_reference }
            }
            _ => return Err(self.error("expected 'primitive' or 'var:' pragma body")),
        };
        match self.peek().clone() {
            Tok::BinarySelector(op) if op == ">" => {
                self.next();
                Ok(node)
            }
            _ => Err(self.error("expected '>' closing pragma")),
        }
    }

    fn symbol_literal(&mut self, what: &str) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Symbol(s) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.error(&format!("expected {what}"))),
        }
    }

    fn temp_decls(&mut self) -> Result<Vec<String>, FrontendError> {
        self.next(); // '|'
        let mut temps = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Identifier(name) => {
                    self.next();
                    temps.push(name);
                }
                Tok::VBar => {
                    self.next();
                    return Ok(temps);
                }
                _ => return Err(self.error("expected temp name or '|'")),
            }
        }
    }

    fn statements(&mut self, no_pragmas_yet: &bool) -> Result<Vec<StatementNode>, FrontendError> {
        let _ = no_pragmas_yet;
        let mut body = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof | Tok::RBracket => break,
                Tok::Period => {
                    self.next();
                    continue;
                }
                Tok::BinarySelector(op) if op == "<" && self.looks_like_pragma() => {
                    let t = &self.tokens[self.pos];
                    return Err(FrontendError::PragmaPlacement {
                        line: t.line,
                        column: t.column,
                    });
                }
                Tok::Semicolon => return Err(self.error("cascades are not supported")),
                _ => {}
            }
            if !body.is_empty() && matches!(body.last(), Some(StatementNode::Return(_))) {
                return Err(self.error("return must be the final statement"));
            }
            body.push(self.statement()?);
        }
        Ok(body)
    }

    fn statement(&mut self) -> Result<StatementNode, FrontendError> {
        match self.peek().clone() {
            Tok::Caret => {
                self.next();
                let expr = self.expression()?.into_expr(self)?;
                Ok(StatementNode::Return(expr))
            }
            Tok::Identifier(name) if *self.peek_at(1) == Tok::Assign => {
                self.next();
                self.next();
                let expr = self.expression()?.into_expr(self)?;
                Ok(StatementNode::Assign { target: name, expr })
            }
            _ => {
                let expr = self.expression()?.into_expr(self)?;
                Ok(StatementNode::Expr(expr))
            }
        }
    }

    // ── expressions ─────────────────────────────────────────────────────

    fn expression(&mut self) -> Result<PExpr, FrontendError> {
        self.keyword_expression()
    }

    fn keyword_expression(&mut self) -> Result<PExpr, FrontendError> {
        let receiver = self.binary_expression()?;
        if !matches!(self.peek(), Tok::Keyword(_)) {
            return Ok(receiver);
        }
        let receiver = receiver.into_expr(self)?;
        let mut selector = String::new();
        let mut args: Vec<PExpr> = Vec::new();
        while let Tok::Keyword(kw) = self.peek().clone() {
            self.next();
            selector.push_str(&kw);
            args.push(self.binary_expression()?);
        }
        if selector == "callVMFunction:withArguments:" {
            return self.build_vm_call(receiver, args);
        }
        let args = args
            .into_iter()
            .map(|a| a.into_expr(self))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PExpr::Expr(ExprNode::Send { receiver: Box::new(receiver), selector, args }))
    }

    fn build_vm_call(
        &mut self,
        receiver: ExprNode,
        mut args: Vec<PExpr>,
    ) -> Result<PExpr, FrontendError> {
        if receiver != ExprNode::VarRef("self".into()) {
            return Err(self.error("callVMFunction:withArguments: must be sent to self"));
        }
        let braces = args.pop().expect("two keyword segments");
        let name = args.pop().expect("two keyword segments");
        let function_name = match name {
            PExpr::Expr(ExprNode::Literal(Literal::Symbol(s))) if !s.contains(':') => s,
            _ => return Err(self.error("callVMFunction: expects a plain symbol literal")),
        };
        let call_args = match braces {
            PExpr::Braces(items) => items,
            _ => return Err(self.error("withArguments: expects a brace array")),
        };
        Ok(PExpr::Expr(ExprNode::VmCall { function_name, args: call_args }))
    }

    fn binary_expression(&mut self) -> Result<PExpr, FrontendError> {
        let mut left = self.unary_expression()?;
        while let Tok::BinarySelector(op) = self.peek().clone() {
            let left_expr = left.into_expr(self)?;
            self.next();
            let right = self.unary_expression()?.into_expr(self)?;
            left = PExpr::Expr(ExprNode::Send {
                receiver: Box::new(left_expr),
                selector: op,
                args: vec![right],
            });
        }
        Ok(left)
    }

    fn unary_expression(&mut self) -> Result<PExpr, FrontendError> {
        let mut recv = self.primary()?;
        while let Tok::Identifier(name) = self.peek().clone() {
            // an identifier followed by ':=' is the start of the next statement
            if *self.peek_at(1) == Tok::Assign {
                break;
            }
            let recv_expr = recv.into_expr(self)?;
            self.next();
            recv = PExpr::Expr(ExprNode::Send {
                receiver: Box::new(recv_expr),
                selector: name,
                args: Vec::new(),
            });
        }
        Ok(recv)
    }

    fn primary(&mut self) -> Result<PExpr, FrontendError> {
        match self.peek().clone() {
            Tok::Integer(v) => {
                self.next();
                Ok(PExpr::Expr(ExprNode::Literal(Literal::Integer(v))))
            }
            Tok::Character(c) => {
                self.next();
                Ok(PExpr::Expr(ExprNode::Literal(Literal::Character(c))))
            }
            Tok::Symbol(s) => {
                self.next();
                Ok(PExpr::Expr(ExprNode::Literal(Literal::Symbol(s))))
            }
            Tok::Identifier(name) => {
                self.next();
                let expr = match name.as_str() {
                    "true" => ExprNode::Literal(Literal::Boolean(true)),
                    "false" => ExprNode::Literal(Literal::Boolean(false)),
                    "nil" => ExprNode::Literal(Literal::Nil),
                    _ => ExprNode::VarRef(name),
                };
                Ok(PExpr::Expr(expr))
            }
            Tok::LParen => {
                self.next();
                let inner = self.expression()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::LBracket => self.block(),
            Tok::LBrace => self.brace_array(),
            _ => Err(self.error(&format!("expected expression, found {:?}", self.peek()))),
        }
    }

    fn block(&mut self) -> Result<PExpr, FrontendError> {
        self.next(); // '['
        let mut params = Vec::new();
        while *self.peek() == Tok::Colon {
            self.next();
            params.push(self.identifier("block parameter")?);
        }
        if !params.is_empty() {
            self.expect(Tok::VBar, "'|' after block parameters")?;
        }
        let temps = if *self.peek() == Tok::VBar { self.temp_decls()? } else { Vec::new() };
        let body = self.statements(&true)?;
        self.expect(Tok::RBracket, "']' closing block")?;
        Ok(PExpr::Expr(ExprNode::Block { params, temps, body }))
    }

    fn brace_array(&mut self) -> Result<PExpr, FrontendError> {
        self.next(); // '{'
        let mut items = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.next();
                    return Ok(PExpr::Braces(items));
                }
                Tok::Period => {
                    self.next();
                }
                _ => {
                    items.push(self.expression()?.into_expr(self)?);
                }
            }
        }
    }
}
