// Validation view: fetch the next queued example, show the passage with the
// claimed answer highlighted, collect a valid/invalid vote, repeat. An empty
// queue renders the idle screen.

import type { Api } from './api';
import { PassageView, codePointLength } from './offsets';
import type { ValidationTask } from './types';

export class ValidateView {
  private task: ValidationTask | null = null;
  private voting = false;

  constructor(
    readonly root: HTMLElement,
    readonly api: Api,
    readonly validator: string,
  ) {}

  async loadNext(): Promise<void> {
    this.task = await this.api.nextValidation(this.validator);
    this.render();
  }

  private render(): void {
    const doc = this.root.ownerDocument;
    this.root.textContent = '';

    if (this.task === null) {
      const idle = doc.createElement('div');
      idle.className = 'idle-screen';
      idle.textContent = 'No examples are waiting for review. Check back soon.';
      this.root.appendChild(idle);
      return;
    }
    const task = this.task;

    const title = doc.createElement('h2');
    title.textContent = task.passage.title;
    this.root.appendChild(title);

    const passageBox = doc.createElement('div');
    passageBox.className = 'passage';
    this.root.appendChild(passageBox);
    const view = new PassageView(passageBox, task.passage.text);
    view.render({
      charStart: task.answer.char_start,
      charEnd: task.answer.char_start + codePointLength(task.answer.text),
    });

    const question = doc.createElement('p');
    question.className = 'validation-question';
    question.textContent = `Question: ${task.question}`;
    this.root.appendChild(question);

    const ask = doc.createElement('p');
    ask.className = 'validation-ask';
    ask.textContent = 'Does the highlighted span correctly answer the question?';
    this.root.appendChild(ask);

    const buttons = doc.createElement('div');
    buttons.className = 'vote-buttons';
    this.root.appendChild(buttons);
    for (const verdict of ['valid', 'invalid'] as const) {
      const button = doc.createElement('button');
      button.className = `vote-${verdict}`;
      button.textContent = verdict === 'valid' ? 'Valid' : 'Invalid';
      button.addEventListener('click', () => void this.castVote(verdict));
      buttons.appendChild(button);
    }
  }

  async castVote(verdict: 'valid' | 'invalid'): Promise<void> {
    if (this.task === null || this.voting) return;
    this.voting = true;
    try {
      // one key per (task, validator): a double click must not double-vote
      const key = `${this.task.task_id}:${this.validator}`;
      await this.api.vote(this.task.task_id, this.validator, verdict, key);
    } finally {
      this.voting = false;
    }
    await this.loadNext();
  }
}
