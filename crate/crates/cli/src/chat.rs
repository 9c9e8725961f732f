//! Terminal session: the person types structured user acts, one per line.
//!
//! A line is an act name followed by its arguments, e.g. `inform v12 pos`,
//! `reply i4 neg`, `openquestion s2`, `thanks`. `menus`, `graph`,
//! `why i4` and `quit` are commands.

use std::io::{BufRead, Write};

use anyhow::{anyhow, bail};
use memrex::dialog::{Act, DialogAction, Sentiment, UserAct};
use memrex::service::{CreateSession, Menus, SessionHub, SessionStatus, SessionView, TurnResponse};
use memrex::{ItemId, SlotId, ValueId};

pub fn parse_line(line: &str) -> anyhow::Result<DialogAction> {
    let mut words = line.split_whitespace();
    let name = words.next().ok_or_else(|| anyhow!("empty line"))?;
    let act = UserAct::ALL
        .into_iter()
        .find(|a| Act::User(*a).name().eq_ignore_ascii_case(name))
        .ok_or_else(|| anyhow!("unknown act {name:?}"))?;
    let mut a = DialogAction::user(act);
    for w in words {
        let id = |rest: &str| rest.parse::<u32>().map_err(|_| anyhow!("bad id {w:?}"));
        match w {
            "pos" => a.sentiment = Some(Sentiment::PosOn),
            "neg" => a.sentiment = Some(Sentiment::NegOn),
            "neu" => a.sentiment = Some(Sentiment::NeuOn),
            _ if w.starts_with('i') => a.item = Some(ItemId(id(&w[1..])?)),
            _ if w.starts_with('s') => a.slot = Some(SlotId(id(&w[1..])?)),
            _ if w.starts_with('v') => a.value = Some(ValueId(id(&w[1..])?)),
            _ => bail!("cannot read {w:?}"),
        }
    }
    Ok(a)
}

fn render(a: &DialogAction, hub: &SessionHub) -> String {
    let cat = hub.catalog();
    let mut s = a.act.name().to_string();
    if let Some(i) = a.item {
        s += &format!(
            " {}",
            cat.item(i).map_or(i.to_string(), |x| format!("{} ({i})", x.name))
        );
    }
    if let Some(v) = a.slot {
        s += &format!(
            " {}",
            cat.slot(v).map_or(v.to_string(), |x| format!("{} ({v})", x.name))
        );
    }
    if let Some(v) = a.value {
        s += &format!(
            " {}",
            cat.value(v).map_or(v.to_string(), |x| format!("{} ({v})", x.name))
        );
    }
    if let Some(x) = a.sentiment {
        s += &format!(" [{x:?}]");
    }
    s
}

fn print_menus(out: &mut impl Write, m: &Menus) -> std::io::Result<()> {
    let acts: Vec<_> = m.acts.iter().map(|a| Act::User(*a).name()).collect();
    writeln!(out, "acts: {}", acts.join(", "))?;
    let items: Vec<_> = m.items.iter().map(|x| format!("{} {}", x.id, x.name)).collect();
    writeln!(out, "items: {}", items.join("; "))?;
    let slots: Vec<_> = m.slots.iter().map(|x| format!("{} {}", x.id, x.name)).collect();
    writeln!(out, "slots: {}", slots.join("; "))?;
    let values: Vec<_> = m.values.iter().map(|x| format!("{} {}", x.id, x.name)).collect();
    writeln!(out, "values: {}", values.join("; "))
}

fn print_opening(out: &mut impl Write, v: &SessionView) -> std::io::Result<()> {
    writeln!(
        out,
        "session {} with agent {} on {}",
        v.session_id, v.agent, v.scenario_id
    )?;
    let goal: Vec<_> = v.goal.items.iter().map(|x| x.name.as_str()).collect();
    let prefs: Vec<_> = v.goal.preferences.iter().map(|x| x.name.as_str()).collect();
    writeln!(out, "you are looking for: {} ({})", goal.join(", "), prefs.join(", "))?;
    if !v.history.is_empty() {
        let h: Vec<_> = v.history.iter().map(|x| x.name.as_str()).collect();
        writeln!(out, "you have visited: {}", h.join(", "))?;
    }
    print_menus(out, &v.menus)
}

fn print_turn(out: &mut impl Write, r: &TurnResponse, hub: &SessionHub) -> std::io::Result<()> {
    for t in &r.graph_delta {
        writeln!(out, "  + {:?}", t)?;
    }
    if let Some(a) = &r.agent_action {
        writeln!(out, "agent: {}", render(a, hub))?;
    }
    for p in &r.explanations {
        writeln!(out, "  because {p}")?;
    }
    Ok(())
}

/// Runs one session to completion or end of input and returns its status.
pub fn run(
    hub: &SessionHub,
    req: &CreateSession,
    input: impl BufRead,
    mut out: impl Write,
) -> anyhow::Result<SessionStatus> {
    let view = hub.create(req)?;
    let id = view.session_id.clone();
    print_opening(&mut out, &view)?;
    let mut status = view.status;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        match line.split_whitespace().next() {
            None => continue,
            Some("quit") => break,
            Some("menus") => print_menus(&mut out, &hub.with(&id, |s| s.menus())?)?,
            Some("graph") => {
                for t in hub.with(&id, |s| s.graph_json())?.triples {
                    writeln!(out, "  {:?}", t)?;
                }
            }
            Some("why") => match line[3..].trim().trim_start_matches('i').parse::<u32>() {
                Ok(i) => {
                    for p in hub.with(&id, |s| s.explanations(ItemId(i)))??.paths {
                        writeln!(out, "  {p}")?;
                    }
                }
                Err(_) => writeln!(out, "usage: why i<item>")?,
            },
            Some(_) => {
                let reply = parse_line(line).and_then(|a| Ok(hub.post_turn(&id, a)?));
                match reply {
                    Ok(r) => {
                        print_turn(&mut out, &r, hub)?;
                        status = r.status;
                    }
                    Err(e) => writeln!(out, "error: {e}")?,
                }
            }
        }
        if status != SessionStatus::Open {
            writeln!(out, "session {status:?}")?;
            break;
        }
    }
    Ok(status)
}
