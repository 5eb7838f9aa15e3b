// Knowledge-graph view model: parse the jsonl export, lay nodes out with a
// small force simulation, and expose per-node incident triples for the
// click-through inspector.

export interface GraphEdge {
  subject: string;
  predicate: string;
  object: string;
  provenance: string[];
}

export interface GraphModel {
  nodes: string[];
  edges: GraphEdge[];
}

export class GraphParseError extends Error {}

export function parseGraphExport(jsonl: string): GraphModel {
  const nodes = new Set<string>();
  const edges: GraphEdge[] = [];
  for (const [index, line] of jsonl.split('\n').entries()) {
    if (!line.trim()) continue;
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch {
      throw new GraphParseError(`line ${index + 1} is not valid JSON`);
    }
    const edge = record as Partial<GraphEdge>;
    if (
      typeof edge.subject !== 'string' ||
      typeof edge.predicate !== 'string' ||
      typeof edge.object !== 'string'
    ) {
      throw new GraphParseError(`line ${index + 1} is missing triple fields`);
    }
    nodes.add(edge.subject);
    nodes.add(edge.object);
    edges.push({
      subject: edge.subject,
      predicate: edge.predicate,
      object: edge.object,
      provenance: Array.isArray(edge.provenance) ? edge.provenance.map(String) : [],
    });
  }
  return { nodes: [...nodes].sort(), edges };
}

export interface LayoutPoint {
  x: number;
  y: number;
}

export interface GraphViewModel {
  model: GraphModel;
  positions: Map<string, LayoutPoint>;
  highlights: Set<string>;
}

/** Deterministic pseudo-random generator so layouts are reproducible. */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Spring-electric layout: uniform repulsion between all pairs, springs along
 * edges, mild centering. Iterations are fixed so the result is a pure
 * function of the graph.
 */
export function forceLayout(
  model: GraphModel,
  width = 800,
  height = 600,
  iterations = 200,
): Map<string, LayoutPoint> {
  const rand = mulberry32(42);
  const positions = new Map<string, LayoutPoint>();
  for (const node of model.nodes) {
    positions.set(node, {
      x: width * (0.2 + 0.6 * rand()),
      y: height * (0.2 + 0.6 * rand()),
    });
  }
  if (model.nodes.length < 2) return positions;

  const area = width * height;
  const k = Math.sqrt(area / model.nodes.length);
  let temperature = width / 10;
  for (let step = 0; step < iterations; step++) {
    const forces = new Map<string, LayoutPoint>();
    for (const node of model.nodes) forces.set(node, { x: 0, y: 0 });

    for (let i = 0; i < model.nodes.length; i++) {
      for (let j = i + 1; j < model.nodes.length; j++) {
        const a = model.nodes[i];
        const b = model.nodes[j];
        const pa = positions.get(a)!;
        const pb = positions.get(b)!;
        let dx = pa.x - pb.x;
        let dy = pa.y - pb.y;
        let dist = Math.hypot(dx, dy);
        if (dist < 1e-6) {
          dx = rand() - 0.5;
          dy = rand() - 0.5;
          dist = Math.hypot(dx, dy);
        }
        const repulsion = (k * k) / dist;
        const fa = forces.get(a)!;
        const fb = forces.get(b)!;
        fa.x += (dx / dist) * repulsion;
        fa.y += (dy / dist) * repulsion;
        fb.x -= (dx / dist) * repulsion;
        fb.y -= (dy / dist) * repulsion;
      }
    }
    for (const edge of model.edges) {
      if (edge.subject === edge.object) continue;
      const pa = positions.get(edge.subject)!;
      const pb = positions.get(edge.object)!;
      const dx = pa.x - pb.x;
      const dy = pa.y - pb.y;
      const dist = Math.max(Math.hypot(dx, dy), 1e-6);
      const attraction = (dist * dist) / k;
      const fa = forces.get(edge.subject)!;
      const fb = forces.get(edge.object)!;
      fa.x -= (dx / dist) * attraction;
      fa.y -= (dy / dist) * attraction;
      fb.x += (dx / dist) * attraction;
      fb.y += (dy / dist) * attraction;
    }
    for (const node of model.nodes) {
      const p = positions.get(node)!;
      const f = forces.get(node)!;
      const magnitude = Math.max(Math.hypot(f.x, f.y), 1e-6);
      const limited = Math.min(magnitude, temperature);
      p.x += (f.x / magnitude) * limited;
      p.y += (f.y / magnitude) * limited;
      p.x = Math.min(width - 20, Math.max(20, p.x));
      p.y = Math.min(height - 20, Math.max(20, p.y));
    }
    temperature *= 0.975;
  }
  return positions;
}

/**
 * Build the render model. Highlights are filtered to nodes that exist in the
 * graph, so every highlighted node is guaranteed to be rendered.
 */
export function buildGraphView(
  jsonl: string,
  highlights: Iterable<string> = [],
  width = 800,
  height = 600,
): GraphViewModel {
  const model = parseGraphExport(jsonl);
  const nodeSet = new Set(model.nodes);
  const kept = new Set([...highlights].filter((name) => nodeSet.has(name)));
  return {
    model,
    positions: forceLayout(model, width, height),
    highlights: kept,
  };
}

/** Incident triples (with provenance) revealed when a node is clicked. */
export function nodeDetails(model: GraphModel, node: string): GraphEdge[] {
  return model.edges.filter((e) => e.subject === node || e.object === node);
}
