//! Sectioned system-definition files.
//!
//! ```text
//! [coordinates]
//! q
//!
//! [parameters]
//! m = 1
//! k = 0.1
//!
//! [lagrangian]
//! m*qd_q^2/2
//!
//! [dissipation]
//! k*qd_q^3/3
//!
//! [candidates]
//! X = Q: exp(k*q/m)
//!
//! [integration]
//! h = 1e-3
//! T = 10
//! qd_q = 1
//!
//! [monitor]
//! C = m*exp(k*q/m)*qd_q
//! ```
//!
//! Vector components are separated by `;`. Candidates on `TQ` list the
//! base components followed by the fiber components. The `[action]` section
//! takes `so3` or generator lines `name = c1; ...; cn` followed by structure
//! constants `c(a, b) = c^1_ab; ...; c^k_ab`. `[reduction]` names a cyclic
//! coordinate and optionally the momentum value `mu`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use forcedmech_core::bundle::Fiber;
use forcedmech_core::rayleigh::force_from_dissipation;
use forcedmech_core::{Chart, Expr, ForcedLagrangianSystem, SemibasicForm, SymbolKind};

use crate::error::{CliError, SyntaxError};

const SECTIONS: &[&str] = &[
    "coordinates",
    "parameters",
    "lagrangian",
    "force",
    "dissipation",
    "candidates",
    "action",
    "integration",
    "monitor",
    "reduction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Q,
    TQ,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub space: Space,
    pub components: Vec<Expr>,
}

#[derive(Debug, Clone)]
pub enum Source {
    Unforced,
    Force(Vec<Expr>),
    Dissipation(Expr),
}

#[derive(Debug, Clone)]
pub enum Action {
    So3,
    Custom {
        names: Vec<String>,
        generators: Vec<Vec<Expr>>,
        /// `structure[a][b][c] = c^c_ab`.
        structure: Vec<Vec<Vec<Expr>>>,
    },
}

#[derive(Debug, Clone)]
pub struct Integration {
    pub h: f64,
    pub t_end: f64,
    /// `(q, q̇)`.
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub cyclic: usize,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SystemFile {
    pub chart: Chart,
    pub lagrangian: Expr,
    pub source: Source,
    pub candidates: Vec<Candidate>,
    pub action: Option<Action>,
    pub integration: Option<Integration>,
    pub monitors: Vec<(String, Expr)>,
    pub reduction: Option<Reduction>,
}

/// One non-blank line of a section with its position in the file.
#[derive(Debug, Clone)]
struct Line {
    text: String,
    number: usize,
    /// 1-based column of the first character of `text`.
    column: usize,
}

impl Line {
    fn error(&self, offset: usize, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.number,
            column: self.column + offset,
            message: message.into(),
        }
    }

    /// Split `key = value`, returning the value as a line of its own.
    fn key_value(&self) -> Result<(String, Line), SyntaxError> {
        let eq = self
            .text
            .find('=')
            .ok_or_else(|| self.error(0, "expected `name = value`"))?;
        let key = self.text[..eq].trim().to_string();
        if key.is_empty() {
            return Err(self.error(0, "missing name before `=`"));
        }
        Ok((key, self.sub(eq + 1, self.text.len())))
    }

    /// Sub-line for the byte range `[start, end)`, trimmed.
    fn sub(&self, start: usize, end: usize) -> Line {
        let raw = &self.text[start..end];
        let lead = raw.len() - raw.trim_start().len();
        Line {
            text: raw.trim().to_string(),
            number: self.number,
            column: self.column + self.text[..start + lead].chars().count(),
        }
    }

    /// Split on `;` into trimmed sub-lines.
    fn components(&self) -> Vec<Line> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, ch) in self.text.char_indices() {
            if ch == ';' {
                out.push(self.sub(start, i));
                start = i + 1;
            }
        }
        out.push(self.sub(start, self.text.len()));
        out
    }

    fn number(&self) -> Result<f64, SyntaxError> {
        self.text
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.error(0, format!("expected a number, found `{}`", self.text)))
    }
}

fn split_sections(src: &str) -> Result<BTreeMap<String, (usize, Vec<Line>)>, SyntaxError> {
    let mut sections: BTreeMap<String, (usize, Vec<Line>)> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in src.lines().enumerate() {
        let number = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let column = content[..content.len() - content.trim_start().len()]
            .chars()
            .count()
            + 1;
        let line = Line {
            text: trimmed.to_string(),
            number,
            column,
        };
        if trimmed.starts_with('[') {
            if !trimmed.ends_with(']') {
                return Err(line.error(0, "unterminated section header"));
            }
            let name = trimmed[1..trimmed.len() - 1].trim().to_lowercase();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(line.error(1, format!("unknown section `{name}`")));
            }
            if sections.contains_key(&name) {
                return Err(line.error(1, format!("duplicate section `{name}`")));
            }
            sections.insert(name.clone(), (number, Vec::new()));
            current = Some(name);
            continue;
        }
        match &current {
            Some(name) => sections.get_mut(name).unwrap().1.push(line),
            None => return Err(line.error(0, "content before the first section header")),
        }
    }
    Ok(sections)
}

fn single<'a>(
    sections: &'a BTreeMap<String, (usize, Vec<Line>)>,
    name: &str,
) -> Result<Option<&'a Line>, SyntaxError> {
    match sections.get(name) {
        None => Ok(None),
        Some((header, lines)) => match lines.as_slice() {
            [one] => Ok(Some(one)),
            [] => Err(SyntaxError {
                line: *header,
                column: 1,
                message: format!("section `{name}` is empty"),
            }),
            [_, second, ..] => {
                Err(second.error(0, format!("section `{name}` takes a single expression")))
            }
        },
    }
}

fn parse_expr(chart: &Chart, line: &Line) -> Result<Expr, SyntaxError> {
    let e = chart
        .parse(&line.text)
        .map_err(|e| line.error(e.column.saturating_sub(1), e.kind.to_string()))?;
    if let Some(p) = e
        .free_symbols()
        .iter()
        .find(|s| s.kind() == SymbolKind::Momentum)
    {
        return Err(line.error(0, format!("momentum `{p}` is not allowed on TQ")));
    }
    Ok(e)
}

fn check_name(line: &Line, name: &str, seen: &mut HashSet<String>) -> Result<(), SyntaxError> {
    let valid = name.chars().next().is_some_and(char::is_alphabetic)
        && name.chars().all(|c| c.is_alphanumeric() || c == '_');
    if !valid {
        return Err(line.error(0, format!("invalid name `{name}`")));
    }
    if !seen.insert(name.to_string()) {
        return Err(line.error(0, format!("duplicate name `{name}`")));
    }
    Ok(())
}

impl SystemFile {
    pub fn parse_str(src: &str) -> Result<SystemFile, SyntaxError> {
        let sections = split_sections(src)?;
        let empty = Vec::new();
        let lines = |name: &str| sections.get(name).map(|(_, l)| l).unwrap_or(&empty);

        let mut seen = HashSet::new();
        let mut coords = Vec::new();
        for line in lines("coordinates") {
            for (off, word) in line
                .text
                .split(|c: char| c == ',' || c.is_whitespace())
                .scan(0usize, |pos, w| {
                    let off = *pos;
                    *pos += w.len() + 1;
                    Some((off, w))
                })
                .filter(|(_, w)| !w.is_empty())
            {
                let at = line.sub(off, off + word.len());
                check_name(&at, word, &mut seen)?;
                coords.push(word.to_string());
            }
        }
        if coords.is_empty() {
            return Err(SyntaxError {
                line: sections.get("coordinates").map_or(1, |(h, _)| *h),
                column: 1,
                message: "no coordinates declared".into(),
            });
        }
        let mut params = Vec::new();
        for line in lines("parameters") {
            let (name, value) = line.key_value()?;
            check_name(line, &name, &mut seen)?;
            params.push((name, value.number()?));
        }
        let param_refs: Vec<(&str, f64)> = params.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        let chart = Chart::with_parameters(&coords, &param_refs).map_err(|e| SyntaxError {
            line: sections.get("coordinates").map_or(1, |(h, _)| *h),
            column: 1,
            message: e.to_string(),
        })?;
        let n = chart.dim();

        let lagrangian = match single(&sections, "lagrangian")? {
            Some(l) => parse_expr(&chart, l)?,
            None => {
                return Err(SyntaxError {
                    line: 1,
                    column: 1,
                    message: "missing [lagrangian] section".into(),
                })
            }
        };

        let source = match (sections.get("force"), single(&sections, "dissipation")?) {
            (Some((header, _)), Some(_)) => {
                return Err(SyntaxError {
                    line: *header,
                    column: 1,
                    message: "[force] and [dissipation] are mutually exclusive".into(),
                })
            }
            (Some(_), None) => {
                let mut comps = vec![Expr::zero(); n];
                let mut given = HashSet::new();
                for line in lines("force") {
                    let (name, value) = line.key_value()?;
                    let i = chart
                        .coord_index(&name)
                        .ok_or_else(|| line.error(0, format!("`{name}` is not a coordinate")))?;
                    if !given.insert(i) {
                        return Err(line.error(0, format!("duplicate force component `{name}`")));
                    }
                    comps[i] = parse_expr(&chart, &value)?;
                }
                Source::Force(comps)
            }
            (None, Some(l)) => Source::Dissipation(parse_expr(&chart, l)?),
            (None, None) => Source::Unforced,
        };

        let mut names = HashSet::new();
        let mut candidates = Vec::new();
        for line in lines("candidates") {
            let (name, value) = line.key_value()?;
            check_name(line, &name, &mut names)?;
            let colon = value
                .text
                .find(':')
                .ok_or_else(|| value.error(0, "expected `Q:` or `TQ:` before the components"))?;
            let space = match value.text[..colon].trim() {
                "Q" => Space::Q,
                "TQ" => Space::TQ,
                other => return Err(value.error(0, format!("unknown space `{other}`"))),
            };
            let comps = value.sub(colon + 1, value.text.len()).components();
            let want = if space == Space::Q { n } else { 2 * n };
            if comps.len() != want {
                return Err(value.error(
                    0,
                    format!("expected {want} components, got {}", comps.len()),
                ));
            }
            let components = comps
                .iter()
                .map(|c| parse_expr(&chart, c))
                .collect::<Result<Vec<_>, _>>()?;
            if space == Space::Q {
                for (e, c) in components.iter().zip(&comps) {
                    if e.depends_on_kind(SymbolKind::Velocity) {
                        return Err(c.error(0, "components on Q may not depend on velocities"));
                    }
                }
            }
            candidates.push(Candidate {
                name,
                space,
                components,
            });
        }

        let action = match sections.get("action") {
            None => None,
            Some(_) => Some(parse_action(&chart, lines("action"))?),
        };

        let integration = match sections.get("integration") {
            None => None,
            Some(_) => {
                let mut h = 1e-3;
                let mut t_end = 10.0;
                let mut initial = vec![0.0; 2 * n];
                let mut given = HashSet::new();
                for line in lines("integration") {
                    let (key, value) = line.key_value()?;
                    if !given.insert(key.clone()) {
                        return Err(line.error(0, format!("duplicate entry `{key}`")));
                    }
                    let v = value.number()?;
                    match key.as_str() {
                        "h" => h = v,
                        "T" => t_end = v,
                        _ => {
                            let sym = chart
                                .lookup(&key)
                                .filter(|s| {
                                    matches!(
                                        s.kind(),
                                        SymbolKind::Coordinate | SymbolKind::Velocity
                                    )
                                })
                                .ok_or_else(|| {
                                    line.error(0, format!("undeclared symbol `{key}`"))
                                })?;
                            let slot = chart
                                .phase_vars(Fiber::Velocity)
                                .iter()
                                .position(|s| *s == sym)
                                .unwrap();
                            initial[slot] = v;
                        }
                    }
                }
                if !(h > 0.0 && t_end > 0.0) {
                    return Err(SyntaxError {
                        line: sections["integration"].0,
                        column: 1,
                        message: "h and T must be positive".into(),
                    });
                }
                Some(Integration { h, t_end, initial })
            }
        };

        let mut monitors = Vec::new();
        let mut mnames = HashSet::new();
        for line in lines("monitor") {
            let (name, value) = line.key_value()?;
            check_name(line, &name, &mut mnames)?;
            monitors.push((name, parse_expr(&chart, &value)?));
        }

        let reduction = match sections.get("reduction") {
            None => None,
            Some((header, _)) => {
                let mut cyclic = None;
                let mut mu = None;
                for line in lines("reduction") {
                    let (key, value) = line.key_value()?;
                    match key.as_str() {
                        "cyclic" => {
                            cyclic = Some(chart.coord_index(&value.text).ok_or_else(|| {
                                value.error(0, format!("`{}` is not a coordinate", value.text))
                            })?)
                        }
                        "mu" => mu = Some(value.number()?),
                        other => return Err(line.error(0, format!("unknown entry `{other}`"))),
                    }
                }
                let cyclic = cyclic.ok_or_else(|| SyntaxError {
                    line: *header,
                    column: 1,
                    message: "[reduction] needs `cyclic = <coordinate>`".into(),
                })?;
                Some(Reduction { cyclic, mu })
            }
        };

        Ok(SystemFile {
            chart,
            lagrangian,
            source,
            candidates,
            action,
            integration,
            monitors,
            reduction,
        })
    }

    pub fn force(&self) -> Result<SemibasicForm, forcedmech_core::Error> {
        match &self.source {
            Source::Unforced => Ok(SemibasicForm::zero(&self.chart, Fiber::Velocity)),
            Source::Force(c) => SemibasicForm::new(&self.chart, Fiber::Velocity, c.clone()),
            Source::Dissipation(r) => force_from_dissipation(&self.chart, r),
        }
    }

    pub fn dissipation(&self) -> Option<&Expr> {
        match &self.source {
            Source::Dissipation(r) => Some(r),
            _ => None,
        }
    }

    pub fn system(&self, seed: u64) -> Result<ForcedLagrangianSystem, forcedmech_core::Error> {
        ForcedLagrangianSystem::new(
            self.chart.clone(),
            self.lagrangian.clone(),
            self.force()?,
            seed,
        )
    }
}

fn parse_action(chart: &Chart, lines: &[Line]) -> Result<Action, SyntaxError> {
    if let [only] = lines {
        if only.text == "so3" {
            return Ok(Action::So3);
        }
    }
    let n = chart.dim();
    let mut names: Vec<String> = Vec::new();
    let mut generators = Vec::new();
    let mut constants: Vec<(usize, usize, Vec<Expr>, Line)> = Vec::new();
    let mut seen = HashSet::new();
    for line in lines {
        if line.text == "so3" {
            return Err(line.error(0, "`so3` cannot be combined with other generators"));
        }
        let (key, value) = line.key_value()?;
        if let Some(args) = key.strip_prefix("c(").and_then(|r| r.strip_suffix(')')) {
            let idx: Vec<&str> = args.split(',').map(str::trim).collect();
            let find = |s: &str| {
                names
                    .iter()
                    .position(|g| g == s)
                    .ok_or_else(|| line.error(0, format!("unknown generator `{s}`")))
            };
            let [a, b] = idx.as_slice() else {
                return Err(line.error(0, "expected `c(a, b)`"));
            };
            let (a, b) = (find(a)?, find(b)?);
            let comps = value
                .components()
                .iter()
                .map(|c| parse_expr(chart, c))
                .collect::<Result<Vec<_>, _>>()?;
            constants.push((a, b, comps, value));
            continue;
        }
        if !constants.is_empty() {
            return Err(line.error(0, "generators must precede structure constants"));
        }
        check_name(line, &key, &mut seen)?;
        let comps = value.components();
        if comps.len() != n {
            return Err(value.error(0, format!("expected {n} components, got {}", comps.len())));
        }
        let comps = comps
            .iter()
            .map(|c| {
                let e = parse_expr(chart, c)?;
                if e.depends_on_kind(SymbolKind::Velocity) {
                    return Err(c.error(0, "generators may not depend on velocities"));
                }
                Ok(e)
            })
            .collect::<Result<Vec<_>, _>>()?;
        names.push(key);
        generators.push(comps);
    }
    let k = names.len();
    let mut structure = vec![vec![vec![Expr::zero(); k]; k]; k];
    for (a, b, comps, line) in constants {
        if comps.len() != k {
            return Err(line.error(
                0,
                format!("expected {k} structure constants, got {}", comps.len()),
            ));
        }
        for (c, e) in comps.into_iter().enumerate() {
            structure[b][a][c] = (-&e).simplify();
            structure[a][b][c] = e;
        }
    }
    Ok(Action::Custom {
        names,
        generators,
        structure,
    })
}

pub fn parse_system(path: &Path) -> Result<SystemFile, CliError> {
    let src =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    SystemFile::parse_str(&src).map_err(|error| CliError::Parse {
        path: path.display().to_string(),
        error,
    })
}
