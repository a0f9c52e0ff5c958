//! Recursive-descent parser for the PDDL subset, plus the semantic checks
//! (declared predicates/functions, arities, parameter types).

use crate::ast::*;
use crate::error::PddlError;
use crate::lexer::{lex, TokKind, Token};

pub fn parse_domain(text: &str) -> Result<PddlDomain, PddlError> {
    let mut p = Parser::new(text);
    let d = p.domain()?;
    p.expect_eof()?;
    check_domain(&d)?;
    Ok(d)
}

pub fn parse_problem(text: &str, domain: &PddlDomain) -> Result<PddlProblem, PddlError> {
    let mut p = Parser::new(text);
    let pr = p.problem()?;
    p.expect_eof()?;
    check_problem(&pr, domain)?;
    Ok(pr)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Parser {
        Parser {
            toks: lex(text),
            pos: 0,
        }
    }

    fn err_here(&self, msg: impl Into<String>) -> PddlError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or_else(|| {
                self.toks
                    .last()
                    .map(|t| (t.line, t.col + t.text.len() as u32))
                    .unwrap_or((1, 1))
            });
        PddlError::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Token, PddlError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err_here("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_lpar(&mut self) -> Result<(), PddlError> {
        let t = self.next()?;
        if t.kind != TokKind::LPar {
            return Err(PddlError::Parse {
                line: t.line,
                col: t.col,
                msg: format!("expected '(', found '{}'", t.text),
            });
        }
        Ok(())
    }

    fn expect_rpar(&mut self) -> Result<(), PddlError> {
        let t = self.next()?;
        if t.kind != TokKind::RPar {
            return Err(PddlError::Parse {
                line: t.line,
                col: t.col,
                msg: format!("expected ')', found '{}'", t.text),
            });
        }
        Ok(())
    }

    fn sym(&mut self) -> Result<Token, PddlError> {
        let t = self.next()?;
        if t.kind != TokKind::Sym {
            return Err(PddlError::Parse {
                line: t.line,
                col: t.col,
                msg: format!("expected a name, found '{}'", t.text),
            });
        }
        Ok(t)
    }

    fn expect_sym(&mut self, want: &str) -> Result<(), PddlError> {
        let t = self.sym()?;
        if t.text != want {
            return Err(PddlError::Parse {
                line: t.line,
                col: t.col,
                msg: format!("expected '{}', found '{}'", want, t.text),
            });
        }
        Ok(())
    }

    fn at_rpar(&self) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokKind::RPar)
    }

    fn expect_eof(&self) -> Result<(), PddlError> {
        if self.pos != self.toks.len() {
            return Err(self.err_here("trailing tokens after top-level form"));
        }
        Ok(())
    }

    fn domain(&mut self) -> Result<PddlDomain, PddlError> {
        self.expect_lpar()?;
        self.expect_sym("define")?;
        self.expect_lpar()?;
        self.expect_sym("domain")?;
        let name = self.sym()?.text;
        self.expect_rpar()?;

        let mut d = PddlDomain {
            name,
            requirements: Vec::new(),
            types: Vec::new(),
            predicates: Vec::new(),
            functions: Vec::new(),
            actions: Vec::new(),
        };

        while !self.at_rpar() {
            self.expect_lpar()?;
            let head = self.sym()?;
            match head.text.as_str() {
                ":requirements" => {
                    while !self.at_rpar() {
                        let t = self.sym()?;
                        match Requirement::from_flag(&t.text) {
                            Some(r) => d.requirements.push(r),
                            None => {
                                return Err(PddlError::UnsupportedRequirement {
                                    flag: t.text,
                                    line: t.line,
                                    col: t.col,
                                })
                            }
                        }
                    }
                    self.expect_rpar()?;
                }
                ":types" => {
                    d.types = self.typed_names()?;
                    self.expect_rpar()?;
                }
                ":predicates" => {
                    while !self.at_rpar() {
                        d.predicates.push(
                            self.schema()
                                .map(|(name, params)| PredicateSchema { name, params })?,
                        );
                    }
                    self.expect_rpar()?;
                }
                ":functions" => {
                    while !self.at_rpar() {
                        d.functions.push(
                            self.schema()
                                .map(|(name, params)| FunctionSchema { name, params })?,
                        );
                    }
                    self.expect_rpar()?;
                }
                ":action" => {
                    d.actions.push(self.action()?);
                }
                other => {
                    return Err(PddlError::Parse {
                        line: head.line,
                        col: head.col,
                        msg: format!("unsupported domain section '{}'", other),
                    })
                }
            }
        }
        self.expect_rpar()?;
        Ok(d)
    }

    /// `(name ?a - t ?b ?c - u)` for predicate and function declarations.
    fn schema(&mut self) -> Result<(String, Vec<Param>), PddlError> {
        self.expect_lpar()?;
        let name = self.sym()?.text;
        let params = self.params_until_rpar()?;
        self.expect_rpar()?;
        Ok((name, params))
    }

    fn params_until_rpar(&mut self) -> Result<Vec<Param>, PddlError> {
        let mut out: Vec<Param> = Vec::new();
        let mut pending: Vec<String> = Vec::new();
        while !self.at_rpar() {
            let t = self.sym()?;
            if t.text == "-" {
                let ty = self.sym()?.text;
                for name in pending.drain(..) {
                    out.push(Param {
                        name,
                        ty: ty.clone(),
                    });
                }
            } else {
                if !t.text.starts_with('?') {
                    return Err(PddlError::Parse {
                        line: t.line,
                        col: t.col,
                        msg: format!("expected a ?variable, found '{}'", t.text),
                    });
                }
                pending.push(t.text);
            }
        }
        for name in pending {
            out.push(Param {
                name,
                ty: "object".into(),
            });
        }
        Ok(out)
    }

    fn typed_names(&mut self) -> Result<Vec<TypedName>, PddlError> {
        let mut out: Vec<TypedName> = Vec::new();
        let mut pending: Vec<String> = Vec::new();
        while !self.at_rpar() {
            let t = self.sym()?;
            if t.text == "-" {
                let ty = self.sym()?.text;
                for name in pending.drain(..) {
                    out.push(TypedName {
                        name,
                        ty: ty.clone(),
                    });
                }
            } else {
                pending.push(t.text);
            }
        }
        for name in pending {
            out.push(TypedName {
                name,
                ty: "object".into(),
            });
        }
        Ok(out)
    }

    fn action(&mut self) -> Result<ActionSchema, PddlError> {
        let name = self.sym()?.text;
        let mut params = Vec::new();
        let mut precondition = Condition::And(Vec::new());
        let mut effect = Effect::And(Vec::new());
        while !self.at_rpar() {
            let key = self.sym()?;
            match key.text.as_str() {
                ":parameters" => {
                    self.expect_lpar()?;
                    params = self.params_until_rpar()?;
                    self.expect_rpar()?;
                }
                ":precondition" => precondition = self.condition()?,
                ":effect" => effect = self.effect()?,
                other => {
                    return Err(PddlError::Parse {
                        line: key.line,
                        col: key.col,
                        msg: format!("unsupported action key '{}'", other),
                    })
                }
            }
        }
        self.expect_rpar()?;
        Ok(ActionSchema {
            name,
            params,
            precondition,
            effect,
        })
    }

    fn atom_body(&mut self, pred: String) -> Result<Atom, PddlError> {
        let mut args = Vec::new();
        while !self.at_rpar() {
            let t = self.sym()?;
            if t.text.starts_with('?') {
                args.push(Term::Var(t.text));
            } else {
                args.push(Term::Const(t.text));
            }
        }
        self.expect_rpar()?;
        Ok(Atom { pred, args })
    }

    fn condition(&mut self) -> Result<Condition, PddlError> {
        self.expect_lpar()?;
        let head = self.sym()?;
        match head.text.as_str() {
            "and" => {
                let mut cs = Vec::new();
                while !self.at_rpar() {
                    cs.push(self.condition()?);
                }
                self.expect_rpar()?;
                Ok(Condition::And(cs))
            }
            "not" => {
                self.expect_lpar()?;
                let pred = self.sym()?.text;
                let a = self.atom_body(pred)?;
                self.expect_rpar()?;
                Ok(Condition::Not(a))
            }
            pred => {
                let pred = pred.to_string();
                Ok(Condition::Atom(self.atom_body(pred)?))
            }
        }
    }

    fn fn_term(&mut self) -> Result<FnTerm, PddlError> {
        self.expect_lpar()?;
        let name = self.sym()?.text;
        let a = self.atom_body(name.clone())?;
        Ok(FnTerm { name, args: a.args })
    }

    fn effect(&mut self) -> Result<Effect, PddlError> {
        self.expect_lpar()?;
        let head = self.sym()?;
        match head.text.as_str() {
            "and" => {
                let mut es = Vec::new();
                while !self.at_rpar() {
                    es.push(self.effect()?);
                }
                self.expect_rpar()?;
                Ok(Effect::And(es))
            }
            "not" => {
                self.expect_lpar()?;
                let pred = self.sym()?.text;
                let a = self.atom_body(pred)?;
                self.expect_rpar()?;
                Ok(Effect::Del(a))
            }
            "increase" => {
                let target = self.fn_term()?;
                let amount = match self.peek() {
                    Some(t) if t.kind == TokKind::LPar => NumExpr::Fn(self.fn_term()?),
                    _ => {
                        let t = self.sym()?;
                        let v: f64 = t.text.parse().map_err(|_| PddlError::Parse {
                            line: t.line,
                            col: t.col,
                            msg: format!("expected a number, found '{}'", t.text),
                        })?;
                        NumExpr::Literal(v)
                    }
                };
                self.expect_rpar()?;
                Ok(Effect::Increase(target, amount))
            }
            pred => {
                let pred = pred.to_string();
                Ok(Effect::Add(self.atom_body(pred)?))
            }
        }
    }

    fn problem(&mut self) -> Result<PddlProblem, PddlError> {
        self.expect_lpar()?;
        self.expect_sym("define")?;
        self.expect_lpar()?;
        self.expect_sym("problem")?;
        let name = self.sym()?.text;
        self.expect_rpar()?;
        self.expect_lpar()?;
        self.expect_sym(":domain")?;
        let domain_name = self.sym()?.text;
        self.expect_rpar()?;

        let mut objects = Vec::new();
        let mut init = Vec::new();
        let mut goal = None;
        let mut metric = None;

        while !self.at_rpar() {
            self.expect_lpar()?;
            let head = self.sym()?;
            match head.text.as_str() {
                ":objects" => {
                    objects = self.typed_names()?;
                    self.expect_rpar()?;
                }
                ":init" => {
                    while !self.at_rpar() {
                        self.expect_lpar()?;
                        let t = self.sym()?;
                        if t.text == "=" {
                            let f = self.fn_term()?;
                            let v = self.sym()?;
                            let val: f64 = v.text.parse().map_err(|_| PddlError::Parse {
                                line: v.line,
                                col: v.col,
                                msg: format!("expected a number, found '{}'", v.text),
                            })?;
                            self.expect_rpar()?;
                            init.push(InitElem::FnAssign(f, val));
                        } else {
                            let pred = t.text;
                            init.push(InitElem::Atom(self.atom_body(pred)?));
                        }
                    }
                    self.expect_rpar()?;
                }
                ":goal" => {
                    goal = Some(self.condition()?);
                    self.expect_rpar()?;
                }
                ":metric" => {
                    self.expect_sym("minimize")?;
                    metric = Some(self.fn_term()?);
                    self.expect_rpar()?;
                }
                other => {
                    return Err(PddlError::Parse {
                        line: head.line,
                        col: head.col,
                        msg: format!("unsupported problem section '{}'", other),
                    })
                }
            }
        }
        self.expect_rpar()?;
        let goal = goal.ok_or_else(|| self.err_here("problem has no :goal"))?;
        Ok(PddlProblem {
            name,
            domain_name,
            objects,
            init,
            goal,
            metric,
        })
    }
}

fn check_atom(
    atom: &Atom,
    preds: &std::collections::BTreeMap<&str, &PredicateSchema>,
    param_names: Option<&[Param]>,
) -> Result<(), PddlError> {
    let schema = preds
        .get(atom.pred.as_str())
        .ok_or_else(|| PddlError::Semantic(format!("undeclared predicate '{}'", atom.pred)))?;
    if schema.params.len() != atom.args.len() {
        return Err(PddlError::Semantic(format!(
            "predicate '{}' expects {} arguments, got {}",
            atom.pred,
            schema.params.len(),
            atom.args.len()
        )));
    }
    if let Some(params) = param_names {
        for arg in &atom.args {
            match arg {
                Term::Var(v) => {
                    if !params.iter().any(|p| &p.name == v) {
                        return Err(PddlError::Semantic(format!(
                            "variable '{}' in '{}' is not an action parameter",
                            v, atom.pred
                        )));
                    }
                }
                Term::Const(c) => {
                    return Err(PddlError::Semantic(format!(
                        "constant '{}' in action body '{}' is not supported",
                        c, atom.pred
                    )));
                }
            }
        }
    }
    Ok(())
}

fn check_domain(d: &PddlDomain) -> Result<(), PddlError> {
    let types = TypeTable::new(&d.types);
    for t in &d.types {
        if !types.is_declared(&t.ty) {
            return Err(PddlError::Semantic(format!(
                "type '{}' has undeclared parent '{}'",
                t.name, t.ty
            )));
        }
    }
    let preds: std::collections::BTreeMap<&str, &PredicateSchema> =
        d.predicates.iter().map(|p| (p.name.as_str(), p)).collect();
    let fns: std::collections::BTreeMap<&str, &FunctionSchema> =
        d.functions.iter().map(|f| (f.name.as_str(), f)).collect();
    for p in &d.predicates {
        for param in &p.params {
            if !types.is_declared(&param.ty) {
                return Err(PddlError::Semantic(format!(
                    "predicate '{}' parameter '{}' has undeclared type '{}'",
                    p.name, param.name, param.ty
                )));
            }
        }
    }
    for a in &d.actions {
        for param in &a.params {
            if !types.is_declared(&param.ty) {
                return Err(PddlError::Semantic(format!(
                    "action '{}' parameter '{}' has undeclared type '{}'",
                    a.name, param.name, param.ty
                )));
            }
        }
        let (pos, neg) = a.precondition.literals();
        for atom in pos.iter().chain(neg.iter()) {
            check_atom(atom, &preds, Some(&a.params))?;
        }
        let (add, del, inc) = a.effect.parts();
        for atom in add.iter().chain(del.iter()) {
            check_atom(atom, &preds, Some(&a.params))?;
        }
        for (target, amount) in inc {
            if target.name != "total-cost" || !target.args.is_empty() {
                return Err(PddlError::Semantic(format!(
                    "action '{}': only (increase (total-cost) ...) is supported",
                    a.name
                )));
            }
            if !fns.contains_key("total-cost") {
                return Err(PddlError::Semantic(
                    "function 'total-cost' is not declared".into(),
                ));
            }
            match amount {
                NumExpr::Literal(v) => {
                    if !v.is_finite() || *v < 0.0 {
                        return Err(PddlError::Semantic(format!(
                            "action '{}': cost literal must be finite and nonnegative",
                            a.name
                        )));
                    }
                }
                NumExpr::Fn(t) => {
                    let schema = fns.get(t.name.as_str()).ok_or_else(|| {
                        PddlError::Semantic(format!("undeclared function '{}'", t.name))
                    })?;
                    if schema.params.len() != t.args.len() {
                        return Err(PddlError::Semantic(format!(
                            "function '{}' expects {} arguments, got {}",
                            t.name,
                            schema.params.len(),
                            t.args.len()
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_problem(pr: &PddlProblem, d: &PddlDomain) -> Result<(), PddlError> {
    let types = TypeTable::new(&d.types);
    let preds: std::collections::BTreeMap<&str, &PredicateSchema> =
        d.predicates.iter().map(|p| (p.name.as_str(), p)).collect();
    let fns: std::collections::BTreeMap<&str, &FunctionSchema> =
        d.functions.iter().map(|f| (f.name.as_str(), f)).collect();
    let mut objs = std::collections::BTreeMap::new();
    for o in &pr.objects {
        if !types.is_declared(&o.ty) {
            return Err(PddlError::Semantic(format!(
                "object '{}' has undeclared type '{}'",
                o.name, o.ty
            )));
        }
        if objs.insert(o.name.as_str(), o.ty.as_str()).is_some() {
            return Err(PddlError::Semantic(format!(
                "object '{}' declared twice",
                o.name
            )));
        }
    }
    let check_ground_atom = |atom: &Atom| -> Result<(), PddlError> {
        check_atom(atom, &preds, None)?;
        let schema = preds[atom.pred.as_str()];
        for (arg, param) in atom.args.iter().zip(&schema.params) {
            match arg {
                Term::Const(c) => {
                    let oty = objs.get(c.as_str()).ok_or_else(|| {
                        PddlError::Semantic(format!("undeclared object '{}' in '{}'", c, atom.pred))
                    })?;
                    if !types.is_subtype(oty, &param.ty) {
                        return Err(PddlError::Semantic(format!(
                            "object '{}' of type '{}' does not fit parameter '{}' of '{}'",
                            c, oty, param.ty, atom.pred
                        )));
                    }
                }
                Term::Var(v) => {
                    return Err(PddlError::Semantic(format!(
                        "variable '{}' is not allowed outside action schemas",
                        v
                    )));
                }
            }
        }
        Ok(())
    };
    for e in &pr.init {
        match e {
            InitElem::Atom(a) => check_ground_atom(a)?,
            InitElem::FnAssign(t, v) => {
                let schema = fns.get(t.name.as_str()).ok_or_else(|| {
                    PddlError::Semantic(format!("undeclared function '{}'", t.name))
                })?;
                if schema.params.len() != t.args.len() {
                    return Err(PddlError::Semantic(format!(
                        "function '{}' expects {} arguments, got {}",
                        t.name,
                        schema.params.len(),
                        t.args.len()
                    )));
                }
                for a in &t.args {
                    if let Term::Const(c) = a {
                        if !objs.contains_key(c.as_str()) {
                            return Err(PddlError::Semantic(format!(
                                "undeclared object '{}' in '{}'",
                                c, t.name
                            )));
                        }
                    }
                }
                if !v.is_finite() || *v < 0.0 {
                    return Err(PddlError::Semantic(format!(
                        "init value for '{}' must be finite and nonnegative",
                        t.name
                    )));
                }
            }
        }
    }
    let (pos, neg) = pr.goal.literals();
    for atom in pos.iter().chain(neg.iter()) {
        check_ground_atom(atom)?;
    }
    if let Some(m) = &pr.metric {
        if m.name != "total-cost" || !m.args.is_empty() {
            return Err(PddlError::Semantic(
                "only (:metric minimize (total-cost)) is supported".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = "
(define (domain mini)
  (:requirements :strips)
  (:predicates (done))
  (:action finish
    :parameters ()
    :precondition (and)
    :effect (and (done))))";

    #[test]
    fn minimal_domain_has_one_parameterless_action() {
        let d = parse_domain(MINI).unwrap();
        assert_eq!(d.actions.len(), 1);
        assert!(d.actions[0].params.is_empty());
    }

    #[test]
    fn unknown_requirement_is_rejected() {
        let text = "(define (domain x) (:requirements :adl))";
        match parse_domain(text) {
            Err(PddlError::UnsupportedRequirement { flag, .. }) => assert_eq!(flag, ":adl"),
            other => panic!("expected unsupported requirement, got {:?}", other),
        }
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let text = "
(define (domain x)
  (:predicates (p ?a))
  (:action a :parameters (?a ?b) :precondition (p ?a ?b) :effect (p ?a)))";
        assert!(matches!(parse_domain(text), Err(PddlError::Semantic(_))));
    }

    #[test]
    fn parse_error_carries_position() {
        match parse_domain("(define (domain x) (:types a - ))") {
            Err(PddlError::Parse { line, col, .. }) => {
                assert_eq!(line, 1);
                assert!(col > 1);
            }
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn roundtrip_fixpoint_on_minimal_domain() {
        let d1 = parse_domain(MINI).unwrap();
        let d2 = parse_domain(&d1.to_string()).unwrap();
        assert_eq!(d1, d2);
    }
}
