//! Map emission: a self-contained interactive HTML document plus GraphML and
//! CSV exports. Output bytes are a pure function of the inputs, so identical
//! runs produce identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::ingest::Label;
use crate::layout::LayoutResult;
use crate::record::EnrichedRecord;
use crate::store;

/// Fields shown in the hover tooltip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TooltipField {
    Domain,
    Sha256Id,
    HdrHash,
    Asn,
    Source,
    Label,
}

impl TooltipField {
    pub fn all() -> Vec<TooltipField> {
        vec![
            TooltipField::Domain,
            TooltipField::Sha256Id,
            TooltipField::HdrHash,
            TooltipField::Asn,
            TooltipField::Source,
            TooltipField::Label,
        ]
    }

    fn render(self, record: &EnrichedRecord) -> String {
        match self {
            TooltipField::Domain => format!("domain: {}", record.domain),
            TooltipField::Sha256Id => format!("sha256: {}", record.sha256_id),
            TooltipField::HdrHash => format!(
                "hdrhash: {}",
                record
                    .header
                    .as_ref()
                    .map_or("-".to_string(), |h| h.hash.to_string())
            ),
            TooltipField::Asn => format!(
                "asn: {}",
                record.asn.map_or("-".to_string(), |a| a.to_string())
            ),
            TooltipField::Source => format!("source: {}", record.source),
            TooltipField::Label => format!("label: {}", record.label),
        }
    }
}

/// Colors and tooltip selection for the HTML map.
#[derive(Debug, Clone)]
pub struct RenderSpec {
    pub color_good: String,
    pub color_bad: String,
    pub color_unknown: String,
    pub point_size: f64,
    pub tooltip_fields: Vec<TooltipField>,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            color_good: "#2ca02c".into(),   // green
            color_bad: "#d62728".into(),    // red
            color_unknown: "#ff8c00".into(), // orange
            point_size: 4.0,
            tooltip_fields: TooltipField::all(),
        }
    }
}

impl RenderSpec {
    pub fn color_for(&self, label: Label) -> &str {
        match label {
            Label::Good => &self.color_good,
            Label::Bad => &self.color_bad,
            Label::Unknown => &self.color_unknown,
        }
    }

    /// All three labels must map to distinct colors.
    fn validate(&self) -> Result<()> {
        if self.color_good == self.color_bad
            || self.color_good == self.color_unknown
            || self.color_bad == self.color_unknown
        {
            return Err(Error::Config("label colors must be distinct".into()));
        }
        Ok(())
    }
}

fn check_alignment(layout: &LayoutResult, records: &[EnrichedRecord]) -> Result<()> {
    if layout.node_count() != records.len() {
        return Err(Error::Alignment(format!(
            "{} layout nodes vs {} records",
            layout.node_count(),
            records.len()
        )));
    }
    for (position, record) in records.iter().enumerate() {
        if record.id != position {
            return Err(Error::Alignment(format!(
                "record at position {position} has id {}",
                record.id
            )));
        }
    }
    Ok(())
}

/// Emit the interactive map. Self-contained: the file makes no network
/// fetches at view time.
pub fn render_html(
    layout: &LayoutResult,
    records: &[EnrichedRecord],
    spec: &RenderSpec,
    title: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    spec.validate()?;
    check_alignment(layout, records)?;

    let mut nodes = String::from("[");
    for record in records {
        if record.id > 0 {
            nodes.push(',');
        }
        let tip: Vec<String> = spec
            .tooltip_fields
            .iter()
            .map(|f| f.render(record))
            .collect();
        let datum = serde_json::json!({
            "x": layout.x[record.id],
            "y": layout.y[record.id],
            "c": spec.color_for(record.label),
            "t": tip.join("\n"),
        });
        nodes.push_str(&serde_json::to_string(&datum)?);
    }
    nodes.push(']');

    let mut edges = String::from("[");
    for (i, (&s, &t)) in layout.s.iter().zip(&layout.t).enumerate() {
        if i > 0 {
            edges.push(',');
        }
        let _ = write!(edges, "[{s},{t}]");
    }
    edges.push(']');

    let legend = format!(
        "<span class=\"sw\" style=\"background:{}\"></span>good \
         <span class=\"sw\" style=\"background:{}\"></span>bad \
         <span class=\"sw\" style=\"background:{}\"></span>unknown",
        html_escape(&spec.color_good),
        html_escape(&spec.color_bad),
        html_escape(&spec.color_unknown),
    );

    let html = HTML_TEMPLATE
        .replace("__TITLE__", &html_escape(title))
        .replace("__LEGEND__", &legend)
        .replace("__POINT_SIZE__", &format!("{}", spec.point_size))
        .replace("__NODES__", &nodes)
        .replace("__EDGES__", &edges);

    let path = path.as_ref();
    std::fs::write(path, html.as_bytes()).map_err(|e| Error::io(path, e))
}

fn html_escape(text: &str) -> String {
    xml_escape(text)
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            other => out.push(other),
        }
    }
    out
}

/// GraphML with node attributes (label, domain, sha256, hdrhash, asn, x, y)
/// and edge weights.
pub fn export_graphml(
    layout: &LayoutResult,
    graph: &SimilarityGraph,
    records: &[EnrichedRecord],
    path: impl AsRef<Path>,
) -> Result<()> {
    check_alignment(layout, records)?;
    if graph.node_count != records.len() {
        return Err(Error::Alignment(format!(
            "{} graph nodes vs {} records",
            graph.node_count,
            records.len()
        )));
    }

    let mut doc = String::new();
    doc.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    doc.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (id, name, kind) in [
        ("d0", "label", "int"),
        ("d1", "domain", "string"),
        ("d2", "sha256_id", "string"),
        ("d3", "hdrhash", "string"),
        ("d4", "asn", "string"),
        ("d5", "x", "double"),
        ("d6", "y", "double"),
    ] {
        let _ = writeln!(
            doc,
            "  <key id=\"{id}\" for=\"node\" attr.name=\"{name}\" attr.type=\"{kind}\"/>"
        );
    }
    doc.push_str("  <key id=\"w\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    doc.push_str("  <graph edgedefault=\"undirected\">\n");

    for record in records {
        let _ = writeln!(doc, "    <node id=\"n{}\">", record.id);
        let hdrhash = record
            .header
            .as_ref()
            .map_or(String::new(), |h| h.hash.to_string());
        let asn = record.asn.map_or(String::new(), |a| a.to_string());
        for (key, value) in [
            ("d0", record.label.as_u8().to_string()),
            ("d1", record.domain.clone()),
            ("d2", record.sha256_id.clone()),
            ("d3", hdrhash),
            ("d4", asn),
            ("d5", format!("{}", layout.x[record.id])),
            ("d6", format!("{}", layout.y[record.id])),
        ] {
            let _ = writeln!(doc, "      <data key=\"{key}\">{}</data>", xml_escape(&value));
        }
        doc.push_str("    </node>\n");
    }
    for (index, edge) in graph.edges.iter().enumerate() {
        let _ = writeln!(
            doc,
            "    <edge id=\"e{index}\" source=\"n{}\" target=\"n{}\">",
            edge.u, edge.v
        );
        let _ = writeln!(doc, "      <data key=\"w\">{}</data>", edge.weight);
        doc.push_str("    </edge>\n");
    }
    doc.push_str("  </graph>\n</graphml>\n");

    let path = path.as_ref();
    std::fs::write(path, doc.as_bytes()).map_err(|e| Error::io(path, e))
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// `id,domain,source,label,asn,sha256_id,hdrhash,x,y`
pub fn write_nodes_csv(
    layout: &LayoutResult,
    records: &[EnrichedRecord],
    path: impl AsRef<Path>,
) -> Result<()> {
    check_alignment(layout, records)?;
    let rows: Vec<String> = records
        .iter()
        .map(|record| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                record.id,
                csv_field(&record.domain),
                csv_field(&record.source),
                record.label.as_u8(),
                record.asn.map_or(String::new(), |a| a.to_string()),
                record.sha256_id,
                record
                    .header
                    .as_ref()
                    .map_or(String::new(), |h| h.hash.to_string()),
                layout.x[record.id],
                layout.y[record.id],
            )
        })
        .collect();
    store::write_csv(path, "id,domain,source,label,asn,sha256_id,hdrhash,x,y", &rows)
}

/// `u,v,weight` for every graph edge.
pub fn write_edges_csv(graph: &SimilarityGraph, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<String> = graph
        .edges
        .iter()
        .map(|e| format!("{},{},{}", e.u, e.v, e.weight))
        .collect();
    store::write_csv(path, "u,v,weight", &rows)
}

/// Per-label node counts, used by reports.
pub fn label_counts(records: &[EnrichedRecord]) -> BTreeMap<Label, usize> {
    let mut counts = BTreeMap::new();
    for record in records {
        *counts.entry(record.label).or_insert(0) += 1;
    }
    counts
}

const HTML_TEMPLATE: &str = r##"<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>__TITLE__</title>
<style>
html,body{margin:0;height:100%;background:#14161a;color:#d7dce2;font:13px system-ui,sans-serif}
#wrap{position:relative;height:100%;overflow:hidden}
canvas{display:block;width:100%;height:100%;cursor:grab}
#tip{position:absolute;display:none;background:rgba(22,24,29,.94);border:1px solid #4a5561;padding:6px 9px;border-radius:4px;pointer-events:none;white-space:pre;font-size:12px;z-index:2}
#legend{position:absolute;top:10px;left:10px;background:rgba(22,24,29,.85);border:1px solid #333a42;padding:6px 10px;border-radius:4px;z-index:1}
.sw{display:inline-block;width:10px;height:10px;border-radius:5px;margin:0 4px 0 8px;vertical-align:baseline}
</style>
</head>
<body>
<div id="wrap">
<canvas id="map"></canvas>
<div id="tip"></div>
<div id="legend">__TITLE__ &mdash; __LEGEND__</div>
</div>
<script>
"use strict";
var NODES=__NODES__;
var EDGES=__EDGES__;
var POINT=__POINT_SIZE__;
var canvas=document.getElementById("map");
var ctx=canvas.getContext("2d");
var tip=document.getElementById("tip");
var scale=1,originX=0,originY=0,dragging=false,lastX=0,lastY=0;
function resize(){
  var r=window.devicePixelRatio||1;
  canvas.width=canvas.clientWidth*r;
  canvas.height=canvas.clientHeight*r;
  ctx.setTransform(r,0,0,r,0,0);
  draw();
}
function fit(){
  if(!NODES.length){scale=1;originX=0;originY=0;return;}
  var minX=Infinity,maxX=-Infinity,minY=Infinity,maxY=-Infinity;
  NODES.forEach(function(n){
    if(n.x<minX)minX=n.x; if(n.x>maxX)maxX=n.x;
    if(n.y<minY)minY=n.y; if(n.y>maxY)maxY=n.y;
  });
  var w=canvas.clientWidth,h=canvas.clientHeight;
  var spanX=(maxX-minX)||1,spanY=(maxY-minY)||1;
  scale=0.9*Math.min(w/spanX,h/spanY);
  originX=(minX+maxX)/2-w/(2*scale);
  originY=(minY+maxY)/2-h/(2*scale);
}
function sx(x){return (x-originX)*scale;}
function sy(y){return (y-originY)*scale;}
function draw(){
  ctx.clearRect(0,0,canvas.clientWidth,canvas.clientHeight);
  ctx.strokeStyle="#3d4751";
  ctx.lineWidth=1;
  ctx.beginPath();
  EDGES.forEach(function(e){
    var a=NODES[e[0]],b=NODES[e[1]];
    ctx.moveTo(sx(a.x),sy(a.y));
    ctx.lineTo(sx(b.x),sy(b.y));
  });
  ctx.stroke();
  NODES.forEach(function(n){
    ctx.fillStyle=n.c;
    ctx.beginPath();
    ctx.arc(sx(n.x),sy(n.y),POINT,0,6.2832);
    ctx.fill();
  });
}
function nearest(mx,my){
  var best=null,bestD=100;
  NODES.forEach(function(n){
    var dx=sx(n.x)-mx,dy=sy(n.y)-my,d=dx*dx+dy*dy;
    if(d<bestD){bestD=d;best=n;}
  });
  return best;
}
canvas.addEventListener("wheel",function(ev){
  ev.preventDefault();
  var factor=ev.deltaY<0?1.15:1/1.15;
  var mx=ev.offsetX,my=ev.offsetY;
  originX+=mx/scale-mx/(scale*factor);
  originY+=my/scale-my/(scale*factor);
  scale*=factor;
  draw();
},{passive:false});
canvas.addEventListener("mousedown",function(ev){dragging=true;lastX=ev.offsetX;lastY=ev.offsetY;});
window.addEventListener("mouseup",function(){dragging=false;});
canvas.addEventListener("mousemove",function(ev){
  if(dragging){
    originX-=(ev.offsetX-lastX)/scale;
    originY-=(ev.offsetY-lastY)/scale;
    lastX=ev.offsetX;lastY=ev.offsetY;
    draw();
    return;
  }
  var n=nearest(ev.offsetX,ev.offsetY);
  if(n){
    tip.style.display="block";
    tip.style.left=(ev.offsetX+14)+"px";
    tip.style.top=(ev.offsetY+14)+"px";
    tip.textContent=n.t;
  }else{
    tip.style.display="none";
  }
});
window.addEventListener("resize",resize);
fit();
resize();
</script>
</body>
</html>
"##;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{kruskal_msf, GraphEdge};
    use crate::ingest::Label;
    use crate::layout::layout_tree;
    use crate::record::HeaderInfo;
    use crate::testutil::TempDir;

    fn record(id: usize, label: Label) -> EnrichedRecord {
        EnrichedRecord {
            id,
            domain: format!("d{id}.example"),
            ip: None,
            source: "fixture & co".into(),
            label,
            asn: Some(64500),
            sha256_id: format!("{id:064x}"),
            tls: Default::default(),
            header: Some(HeaderInfo {
                hash: 3898065973,
                server_value: Some("nginx".into()),
                keys: vec!["Server".into()],
            }),
        }
    }

    fn three_node_fixture() -> (LayoutResult, SimilarityGraph, Vec<EnrichedRecord>) {
        let records = vec![
            record(0, Label::Good),
            record(1, Label::Bad),
            record(2, Label::Unknown),
        ];
        let graph = SimilarityGraph::from_edges(
            3,
            [
                GraphEdge { u: 0, v: 1, weight: 0.1 },
                GraphEdge { u: 1, v: 2, weight: 0.2 },
            ],
        );
        let forest = kruskal_msf(&graph);
        let layout = layout_tree(&forest, 5);
        (layout, graph, records)
    }

    #[test]
    fn html_contains_every_node_and_edge_once() {
        let (layout, _graph, records) = three_node_fixture();
        let dir = TempDir::new();
        let path = dir.path().join("map.html");
        render_html(&layout, &records, &RenderSpec::default(), "fixture", &path).unwrap();
        let html = std::fs::read_to_string(&path).unwrap();
        assert_eq!(html.matches("domain: d").count(), 3);
        // Path MST over 3 nodes draws exactly 2 edges.
        let edges_payload = html
            .lines()
            .find(|l| l.starts_with("var EDGES="))
            .unwrap();
        assert_eq!(edges_payload.matches('[').count() - 1, 2);
    }

    #[test]
    fn html_applies_label_colors() {
        let (layout, _graph, records) = three_node_fixture();
        let dir = TempDir::new();
        let path = dir.path().join("map.html");
        let spec = RenderSpec::default();
        render_html(&layout, &records, &spec, "fixture", &path).unwrap();
        let html = std::fs::read_to_string(&path).unwrap();
        assert!(html.contains(&spec.color_bad));
        assert!(html.contains(&spec.color_good));
        assert!(html.contains(&spec.color_unknown));
    }

    #[test]
    fn html_is_deterministic_and_self_contained() {
        let (layout, _graph, records) = three_node_fixture();
        let dir = TempDir::new();
        let path_a = dir.path().join("a.html");
        let path_b = dir.path().join("b.html");
        render_html(&layout, &records, &RenderSpec::default(), "fixture", &path_a).unwrap();
        render_html(&layout, &records, &RenderSpec::default(), "fixture", &path_b).unwrap();
        let a = std::fs::read(&path_a).unwrap();
        let b = std::fs::read(&path_b).unwrap();
        assert_eq!(a, b);

        let html = String::from_utf8(a).unwrap();
        for marker in ["http://", "https://", "src=", "href=", "url(", "@import"] {
            assert!(!html.contains(marker), "external reference marker {marker:?} found");
        }
    }

    #[test]
    fn identical_colors_are_rejected() {
        let (layout, _graph, records) = three_node_fixture();
        let dir = TempDir::new();
        let spec = RenderSpec {
            color_bad: "#2ca02c".into(), // collides with good
            ..RenderSpec::default()
        };
        assert!(matches!(
            render_html(&layout, &records, &spec, "x", dir.path().join("x.html")),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn misaligned_ids_are_rejected() {
        let (layout, _graph, mut records) = three_node_fixture();
        records[2].id = 9;
        let dir = TempDir::new();
        assert!(matches!(
            render_html(&layout, &records, &RenderSpec::default(), "x", dir.path().join("x.html")),
            Err(Error::Alignment(_))
        ));
    }

    /// Minimal XML well-formedness scan: angle brackets balance and every
    /// closing tag matches the innermost open tag.
    fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').map(|e| start + e).expect("unclosed <");
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if tag.starts_with('?') || tag.starts_with('!') || tag.ends_with('/') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().unwrap_or_else(|| panic!("stray </{name}>"));
                assert_eq!(open, name, "mismatched closing tag");
            } else {
                let name = tag.split_whitespace().next().unwrap().to_string();
                stack.push(name);
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn graphml_round_trips_a_two_node_fixture() {
        let records = vec![record(0, Label::Good), record(1, Label::Bad)];
        let graph = SimilarityGraph::from_edges(2, [GraphEdge { u: 0, v: 1, weight: 0.25 }]);
        let forest = kruskal_msf(&graph);
        let layout = layout_tree(&forest, 1);
        let dir = TempDir::new();
        let path = dir.path().join("g.graphml");
        export_graphml(&layout, &graph, &records, &path).unwrap();
        let xml = std::fs::read_to_string(&path).unwrap();
        assert_well_formed_xml(&xml);
        assert_eq!(xml.matches("<node ").count(), 2);
        assert_eq!(xml.matches("<edge ").count(), 1);
        assert!(xml.contains("attr.name=\"weight\""));
    }

    #[test]
    fn graphml_empty_layout_is_valid() {
        let layout = LayoutResult { x: vec![], y: vec![], s: vec![], t: vec![] };
        let graph = SimilarityGraph::from_edges(0, []);
        let dir = TempDir::new();
        let path = dir.path().join("empty.graphml");
        export_graphml(&layout, &graph, &[], &path).unwrap();
        let xml = std::fs::read_to_string(&path).unwrap();
        assert_well_formed_xml(&xml);
        assert_eq!(xml.matches("<node ").count(), 0);
    }

    #[test]
    fn graphml_escapes_xml_metacharacters() {
        let mut records = vec![record(0, Label::Good)];
        records[0].source = "a&b <scan> \"q\"".into();
        let graph = SimilarityGraph::from_edges(1, []);
        let forest = kruskal_msf(&graph);
        let layout = layout_tree(&forest, 1);
        let dir = TempDir::new();
        let path = dir.path().join("esc.graphml");
        // source is not exported, but domain is; plant metacharacters there.
        records[0].domain = "bad&<domain>\"".into();
        export_graphml(&layout, &graph, &records, &path).unwrap();
        let xml = std::fs::read_to_string(&path).unwrap();
        assert!(xml.contains("bad&amp;&lt;domain&gt;&quot;"));
        assert_well_formed_xml(&xml);
    }

    #[test]
    fn csv_exports_cover_every_node_and_edge() {
        let (layout, graph, records) = three_node_fixture();
        let dir = TempDir::new();
        let nodes_path = dir.path().join("n.csv");
        let edges_path = dir.path().join("e.csv");
        write_nodes_csv(&layout, &records, &nodes_path).unwrap();
        write_edges_csv(&graph, &edges_path).unwrap();
        let nodes = std::fs::read_to_string(&nodes_path).unwrap();
        let edges = std::fs::read_to_string(&edges_path).unwrap();
        assert_eq!(nodes.lines().count(), 4); // header + 3
        assert_eq!(edges.lines().count(), 3); // header + 2
        assert!(nodes.lines().nth(1).unwrap().starts_with("0,d0.example"));
        // Source field contains a comma-free value but commas elsewhere quote.
        assert!(nodes.contains("fixture & co"));
    }
}
