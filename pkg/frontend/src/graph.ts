/**
 * Linear chain graph: agents as nodes left to right, outputs on the edges.
 * Emits a self-contained SVG string; no layout library for a straight line.
 */

export interface GraphNode {
  name: string;
  status: 'pending' | 'active' | 'done' | 'failed';
  edgeLabel: string | null; // output flowing to the next node
}

const NODE_W = 150;
const NODE_H = 54;
const GAP = 110;
const MARGIN = 16;

const STATUS_FILL: Record<GraphNode['status'], string> = {
  pending: 'var(--node-pending, #e2e8f0)',
  active: 'var(--node-active, #bfdbfe)',
  done: 'var(--node-done, #bbf7d0)',
  failed: 'var(--node-failed, #fecaca)',
};

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function truncateLabel(text: string, max = 24): string {
  const flat = text.replace(/\s+/g, ' ').trim();
  return flat.length <= max ? flat : flat.slice(0, max - 1) + '…';
}

export function chainGraphSvg(nodes: GraphNode[]): string {
  if (nodes.length === 0) {
    return '<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10"></svg>';
  }
  const width = MARGIN * 2 + nodes.length * NODE_W + (nodes.length - 1) * GAP;
  const height = NODE_H + MARGIN * 2 + 24;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" role="img">`,
    '<defs><marker id="arrow" viewBox="0 0 8 8" refX="7" refY="4" markerWidth="7" ' +
      'markerHeight="7" orient="auto"><path d="M0 0 L8 4 L0 8 z" fill="currentColor"/>' +
      '</marker></defs>',
  ];
  const midY = MARGIN + NODE_H / 2;
  nodes.forEach((node, i) => {
    const x = MARGIN + i * (NODE_W + GAP);
    parts.push(
      `<g class="node node-${node.status}">` +
        `<rect x="${x}" y="${MARGIN}" width="${NODE_W}" height="${NODE_H}" rx="8" ` +
        `fill="${STATUS_FILL[node.status]}" stroke="currentColor" stroke-opacity="0.35"/>` +
        `<text x="${x + NODE_W / 2}" y="${midY + 5}" text-anchor="middle" ` +
        `font-size="13" fill="currentColor">${escapeXml(truncateLabel(node.name, 20))}</text>` +
        '</g>',
    );
    if (i < nodes.length - 1) {
      const x1 = x + NODE_W;
      const x2 = x1 + GAP - 6;
      parts.push(
        `<line class="edge" x1="${x1}" y1="${midY}" x2="${x2}" y2="${midY}" ` +
          'stroke="currentColor" stroke-width="1.5" marker-end="url(#arrow)"/>',
      );
      if (node.edgeLabel !== null) {
        parts.push(
          `<text class="edge-label" x="${x1 + GAP / 2}" y="${midY - 10}" ` +
            `text-anchor="middle" font-size="11" fill="currentColor" fill-opacity="0.75">` +
            `${escapeXml(truncateLabel(node.edgeLabel))}</text>`,
        );
      }
    }
  });
  parts.push('</svg>');
  return parts.join('');
}
