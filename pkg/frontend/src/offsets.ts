// Bidirectional mapping between the raw passage string and its rendered DOM.
//
// The server speaks code-point offsets (Python string indices); the DOM speaks
// UTF-16 units. A selection read back through this module therefore survives
// astral-plane characters and rendered line breaks unchanged.

export interface SourceSpan {
  text: string;
  char_start: number; // code points
}

export function utf16FromCodePoint(source: string, cp: number): number {
  let i = 0;
  for (let seen = 0; seen < cp && i < source.length; seen += 1) {
    const code = source.codePointAt(i);
    i += code !== undefined && code > 0xffff ? 2 : 1;
  }
  return i;
}

export function codePointFromUtf16(source: string, utf16: number): number {
  let cp = 0;
  for (let i = 0; i < utf16 && i < source.length; cp += 1) {
    const code = source.codePointAt(i);
    i += code !== undefined && code > 0xffff ? 2 : 1;
  }
  return cp;
}

export function sliceCodePoints(source: string, start: number, end: number): string {
  return source.slice(utf16FromCodePoint(source, start), utf16FromCodePoint(source, end));
}

export function codePointLength(source: string): number {
  let n = 0;
  for (const _ of source) n += 1;
  return n;
}

interface Segment {
  node: Text;
  sourceStart: number; // UTF-16 offset into the raw source
}

interface RangeLike {
  startContainer: Node;
  startOffset: number;
  endContainer: Node;
  endOffset: number;
}

/** Renders a passage into `container` and keeps the node -> source offset map. */
export class PassageView {
  private segments: Segment[] = [];

  constructor(
    readonly container: HTMLElement,
    readonly source: string,
  ) {}

  render(highlight?: { charStart: number; charEnd: number }): void {
    this.container.textContent = '';
    this.segments = [];
    const doc = this.container.ownerDocument;
    const hs = highlight ? utf16FromCodePoint(this.source, highlight.charStart) : -1;
    const he = highlight ? utf16FromCodePoint(this.source, highlight.charEnd) : -1;
    let cursor = 0;
    for (const line of this.source.split('\n')) {
      const para = doc.createElement('p');
      para.className = 'passage-line';
      const lineStart = cursor;
      const lineEnd = cursor + line.length;
      if (highlight && hs < lineEnd && he > lineStart) {
        const from = Math.max(hs, lineStart);
        const to = Math.min(he, lineEnd);
        this.appendChunk(para, lineStart, line.slice(0, from - lineStart));
        const mark = doc.createElement('mark');
        mark.className = 'answer-highlight';
        para.appendChild(mark);
        this.appendChunk(mark, from, line.slice(from - lineStart, to - lineStart));
        this.appendChunk(para, to, line.slice(to - lineStart));
      } else {
        this.appendChunk(para, lineStart, line);
      }
      if (!para.hasChildNodes()) {
        // keep empty source lines visible and selectable-past
        para.appendChild(doc.createTextNode(''));
      }
      this.container.appendChild(para);
      cursor = lineEnd + 1; // the '\n' the renderer swallowed
    }
  }

  private appendChunk(parent: HTMLElement, sourceStart: number, chunk: string): void {
    if (!chunk) return;
    const node = parent.ownerDocument.createTextNode(chunk);
    parent.appendChild(node);
    this.segments.push({ node, sourceStart });
  }

  /** Code-point source offset of a DOM position, or null if outside the passage. */
  sourceOffsetAt(node: Node, offset: number): number | null {
    const pos = this.resolveTextPosition(node, offset);
    if (pos === null) return null;
    for (const seg of this.segments) {
      if (seg.node === pos.node) {
        return codePointFromUtf16(this.source, seg.sourceStart + pos.offset);
      }
    }
    return null;
  }

  /** The span a DOM selection covers, in server coordinates. */
  spanFromRange(range: RangeLike): SourceSpan | null {
    const start = this.sourceOffsetAt(range.startContainer, range.startOffset);
    const end = this.sourceOffsetAt(range.endContainer, range.endOffset);
    if (start === null || end === null || end <= start) return null;
    return { text: sliceCodePoints(this.source, start, end), char_start: start };
  }

  private resolveTextPosition(node: Node, offset: number): { node: Text; offset: number } | null {
    if (node.nodeType === node.TEXT_NODE) {
      return { node: node as Text, offset };
    }
    // element boundary: descend to the nearest text position
    const children = node.childNodes;
    if (children.length === 0) return null;
    if (offset < children.length) {
      const child = children[offset];
      return child === undefined ? null : this.firstTextIn(child);
    }
    const last = children[children.length - 1];
    if (last === undefined) return null;
    const pos = this.lastTextIn(last);
    return pos;
  }

  private firstTextIn(node: Node): { node: Text; offset: number } | null {
    if (node.nodeType === node.TEXT_NODE) return { node: node as Text, offset: 0 };
    for (const child of Array.from(node.childNodes)) {
      const found = this.firstTextIn(child);
      if (found) return found;
    }
    return null;
  }

  private lastTextIn(node: Node): { node: Text; offset: number } | null {
    if (node.nodeType === node.TEXT_NODE) {
      const text = node as Text;
      return { node: text, offset: text.data.length };
    }
    const children = Array.from(node.childNodes);
    for (let i = children.length - 1; i >= 0; i -= 1) {
      const child = children[i];
      if (child === undefined) continue;
      const found = this.lastTextIn(child);
      if (found) return found;
    }
    return null;
  }
}
