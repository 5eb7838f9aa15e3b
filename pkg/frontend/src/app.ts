// Browser wiring: a session picker, the live transcript with kind styling
// and the human-input box, and the knowledge-graph panel. All state derives
// from the HTTP API, so a full page reload reconstructs the identical view.

import { SessionRecord, Turn, WorkbenchApi } from './api.js';
import { GraphParseError, GraphViewModel, buildGraphView, nodeDetails } from './graph.js';
import { TranscriptStore, startPolling } from './transcript.js';

const KIND_LABELS: Record<string, string> = {
  chat: '',
  tool_call: 'tool call',
  tool_result: 'tool result',
  execution_feedback: 'execution feedback',
  human_input: 'human input',
  status: 'status',
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderTurn(turn: Turn): HTMLElement {
  const row = el('div', `turn kind-${turn.kind}`);
  const badge = el('span', 'speaker', turn.speaker);
  row.appendChild(badge);
  const label = KIND_LABELS[turn.kind];
  if (label) row.appendChild(el('span', 'kind-label', label));
  const body = el('pre', 'content', turn.content);
  if (turn.tool_call) {
    body.textContent = `${turn.content}\n[calling ${turn.tool_call.name}(${JSON.stringify(
      turn.tool_call.arguments,
    )})]`.trim();
  }
  row.appendChild(body);
  row.dataset.seq = String(turn.seq);
  return row;
}

export class TranscriptPanel {
  private stop: (() => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly store: TranscriptStore,
  ) {
    this.build();
  }

  private list!: HTMLElement;
  private input!: HTMLTextAreaElement;
  private send!: HTMLButtonElement;
  private noticeBox!: HTMLElement;
  private stateBox!: HTMLElement;
  private renderedThrough = -1;

  private build(): void {
    this.root.replaceChildren();
    this.stateBox = el('div', 'session-state');
    this.list = el('div', 'turns');
    this.noticeBox = el('div', 'notice');
    this.input = document.createElement('textarea');
    this.input.placeholder = 'Waiting for a human checkpoint…';
    this.input.disabled = true;
    this.input.addEventListener('input', () => {
      this.store.draft = this.input.value;
    });
    this.send = el('button', 'send', 'Send');
    this.send.disabled = true;
    this.send.addEventListener('click', () => void this.submit());
    const controls = el('div', 'controls');
    controls.append(this.input, this.send);
    this.root.append(this.stateBox, this.list, this.noticeBox, controls);

    this.store.onChange(() => this.refresh());
    this.stop = startPolling(this.store);
  }

  private async submit(): Promise<void> {
    await this.store.submit();
    this.refresh();
  }

  private refresh(): void {
    // append-only render keyed by seq: turns never reorder or duplicate
    for (const turn of this.store.turns) {
      if (turn.seq <= this.renderedThrough) continue;
      this.list.appendChild(renderTurn(turn));
      this.renderedThrough = turn.seq;
    }
    this.stateBox.textContent = this.store.sessionGone
      ? 'session gone'
      : `state: ${this.store.sessionState}`;
    const enabled = this.store.awaitingHuman;
    this.input.disabled = !enabled;
    this.send.disabled = !enabled;
    if (this.input.value !== this.store.draft) this.input.value = this.store.draft;
    this.noticeBox.textContent = this.store.notice;
    if (enabled) this.input.placeholder = 'The session is waiting for your input';
  }

  dispose(): void {
    this.stop?.();
  }
}

export class GraphPanel {
  constructor(private readonly root: HTMLElement) {}

  renderError(message: string): void {
    this.root.replaceChildren(el('div', 'error-panel', `Could not render graph: ${message}`));
  }

  render(view: GraphViewModel): void {
    if (view.model.nodes.length === 0) {
      this.root.replaceChildren(el('div', 'empty-state', 'The knowledge graph is empty.'));
      return;
    }
    const svgNs = 'http://www.w3.org/2000/svg';
    const svg = document.createElementNS(svgNs, 'svg');
    svg.setAttribute('viewBox', '0 0 800 600');
    svg.setAttribute('class', 'graph-canvas');

    for (const edge of view.model.edges) {
      const from = view.positions.get(edge.subject)!;
      const to = view.positions.get(edge.object)!;
      const line = document.createElementNS(svgNs, 'line');
      line.setAttribute('x1', String(from.x));
      line.setAttribute('y1', String(from.y));
      line.setAttribute('x2', String(to.x));
      line.setAttribute('y2', String(to.y));
      line.setAttribute('class', 'edge');
      svg.appendChild(line);
      const label = document.createElementNS(svgNs, 'text');
      label.setAttribute('x', String((from.x + to.x) / 2));
      label.setAttribute('y', String((from.y + to.y) / 2));
      label.setAttribute('class', 'edge-label');
      label.textContent = edge.predicate;
      svg.appendChild(label);
    }
    const details = el('div', 'node-details');
    for (const node of view.model.nodes) {
      const p = view.positions.get(node)!;
      const circle = document.createElementNS(svgNs, 'circle');
      circle.setAttribute('cx', String(p.x));
      circle.setAttribute('cy', String(p.y));
      circle.setAttribute('r', view.highlights.has(node) ? '10' : '6');
      circle.setAttribute(
        'class',
        view.highlights.has(node) ? 'node highlighted' : 'node',
      );
      circle.addEventListener('click', () => {
        const incident = nodeDetails(view.model, node);
        details.replaceChildren(
          el('h3', undefined, node),
          ...incident.map((e) =>
            el(
              'div',
              'incident-triple',
              `['${e.subject}', '${e.predicate}', '${e.object}'] (${e.provenance.join(', ')})`,
            ),
          ),
        );
      });
      svg.appendChild(circle);
      const label = document.createElementNS(svgNs, 'text');
      label.setAttribute('x', String(p.x + 10));
      label.setAttribute('y', String(p.y + 4));
      label.setAttribute('class', 'node-label');
      label.textContent = node;
      svg.appendChild(label);
    }
    this.root.replaceChildren(svg, details);
  }
}

export async function mountApp(root: HTMLElement, baseUrl: string): Promise<void> {
  const api = new WorkbenchApi(baseUrl);
  root.replaceChildren();

  const picker = el('div', 'picker');
  const scenarioInput = document.createElement('input');
  scenarioInput.value = 'boss_demo';
  const startButton = el('button', undefined, 'Start session');
  picker.append(scenarioInput, startButton);

  const sessionList = el('div', 'sessions');
  const transcriptRoot = el('div', 'transcript-root');
  const graphRoot = el('div', 'graph-root');
  root.append(picker, sessionList, transcriptRoot, graphRoot);

  let panel: TranscriptPanel | null = null;
  const openSession = (id: string) => {
    panel?.dispose();
    panel = new TranscriptPanel(transcriptRoot, new TranscriptStore(api, id));
  };

  startButton.addEventListener('click', async () => {
    const id = await api.createSession(scenarioInput.value, '');
    openSession(id);
  });

  const refreshSessions = async () => {
    let records: SessionRecord[] = [];
    try {
      records = await api.listSessions();
    } catch {
      return;
    }
    sessionList.replaceChildren(
      ...records.map((record) => {
        const row = el('div', 'session-row', `${record.id} · ${record.scenario} · ${record.state}`);
        row.addEventListener('click', () => openSession(record.id));
        return row;
      }),
    );
  };
  await refreshSessions();
  setInterval(() => void refreshSessions(), 2000);

  const graphPanel = new GraphPanel(graphRoot);
  try {
    const jsonl = await api.graphExport('jsonl');
    graphPanel.render(buildGraphView(jsonl));
  } catch (error) {
    if (error instanceof GraphParseError) {
      graphPanel.renderError(error.message);
    }
  }
}

declare global {
  interface Window {
    ontobenchMount?: typeof mountApp;
  }
}

if (typeof window !== 'undefined' && typeof document !== 'undefined') {
  window.ontobenchMount = mountApp;
  const root = document.getElementById('app');
  if (root) {
    const base = root.dataset.baseUrl ?? window.location.origin;
    void mountApp(root, base);
  }
}
