//! Plain-text mesh files: `#nodes`, `#triangles`, `#interface` sections plus
//! a `#meta` section carrying the profile and grading.

use std::io::{BufRead, Write};

use super::{Grading, Mesh};
use crate::error::{Error, Result};
use crate::profiles::ProfileSpec;

pub fn write_mesh(mesh: &Mesh, mut w: impl Write) -> Result<()> {
    writeln!(w, "#meta")?;
    writeln!(w, "profile {}", serde_json::to_string(&mesh.profile)?)?;
    writeln!(w, "grading {:.16e} {:.16e} {}", mesh.grading.h0, mesh.grading.beta, mesh.grading.levels)?;
    writeln!(w, "cap {:.16e}", mesh.cap_height)?;
    writeln!(w, "#nodes")?;
    for (i, p) in mesh.nodes.iter().enumerate() {
        writeln!(w, "{i} {:.16e} {:.16e}", p[0], p[1])?;
    }
    writeln!(w, "#triangles")?;
    for (i, t) in mesh.triangles.iter().enumerate() {
        writeln!(w, "{i} {} {} {} {}", t[0], t[1], t[2], mesh.regions[i])?;
    }
    writeln!(w, "#interface")?;
    for e in &mesh.interface_edges {
        writeln!(w, "{} {}", e[0], e[1])?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse(format!("mesh line {line}: bad or missing field")))
}

pub fn read_mesh(r: impl BufRead) -> Result<Mesh> {
    let mut section = String::new();
    let mut profile: Option<ProfileSpec> = None;
    let mut grading: Option<Grading> = None;
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let mut interface_edges = Vec::new();
    let mut cap_height = 0.0;
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = line.strip_prefix('#') {
            section = s.trim().to_string();
            continue;
        }
        let mut tok = line.split_whitespace();
        match section.as_str() {
            "meta" => match tok.next() {
                Some("profile") => {
                    let json = line["profile".len()..].trim();
                    profile = Some(serde_json::from_str(json)?);
                }
                Some("grading") => {
                    grading = Some(Grading {
                        h0: parse(tok.next(), ln + 1)?,
                        beta: parse(tok.next(), ln + 1)?,
                        levels: parse(tok.next(), ln + 1)?,
                    });
                }
                Some("cap") => cap_height = parse(tok.next(), ln + 1)?,
                _ => {}
            },
            "nodes" => {
                let id: usize = parse(tok.next(), ln + 1)?;
                if id != nodes.len() {
                    return Err(Error::Parse(format!("mesh line {}: node ids must be consecutive", ln + 1)));
                }
                nodes.push([parse(tok.next(), ln + 1)?, parse(tok.next(), ln + 1)?]);
            }
            "triangles" => {
                let _id: usize = parse(tok.next(), ln + 1)?;
                triangles.push([parse(tok.next(), ln + 1)?, parse(tok.next(), ln + 1)?, parse(tok.next(), ln + 1)?]);
                let reg: u8 = parse(tok.next(), ln + 1)?;
                if reg != 1 && reg != 2 {
                    return Err(Error::Parse(format!("mesh line {}: region must be 1 or 2", ln + 1)));
                }
                regions.push(reg);
            }
            "interface" => {
                let a: usize = parse(tok.next(), ln + 1)?;
                let b: usize = parse(tok.next(), ln + 1)?;
                interface_edges.push([a.min(b), a.max(b)]);
            }
            other => return Err(Error::Parse(format!("unknown mesh section '#{other}'"))),
        }
    }
    let profile = profile.ok_or_else(|| Error::Parse("mesh file lacks a profile".into()))?;
    let grading = grading.ok_or_else(|| Error::Parse("mesh file lacks grading".into()))?;
    let prof = profile.build()?;
    let radius = prof.regular_radius();
    let top = prof.sigma(radius);
    if triangles.iter().flatten().chain(interface_edges.iter().flatten()).any(|&i| i >= nodes.len()) {
        return Err(Error::Parse("mesh references a missing node".into()));
    }
    let tip = nodes
        .iter()
        .position(|p| p[0] == 0.0 && p[1] == 0.0)
        .ok_or_else(|| Error::Parse("mesh has no tip node".into()))?;
    let mut mesh = Mesh {
        nodes,
        triangles,
        regions: Vec::new(),
        interface_edges,
        boundary_nodes: Vec::new(),
        grading,
        profile,
        radius,
        top,
        tip,
        cap_height,
    };
    mesh.finish()?;
    // Stored tags win over the flood fill; validate() checks them.
    mesh.regions = regions;
    Ok(mesh)
}
