// Narrative theming comes from one configuration object (app names plus a
// sprite sheet); instructors reskin the game without touching code.

export interface Theme {
  title: string;
  apps: { mail: string; plot: string; sign: string; admin: string };
  spriteSheet: string;
  sprites: Record<string, { x: number; y: number; w: number; h: number }>;
}

export const DEFAULT_THEME: Theme = {
  title: 'showhide',
  apps: { mail: 'Mail', plot: 'Plot', sign: 'Sign', admin: 'Dashboard' },
  spriteSheet: '',
  sprites: {},
};

export function loadTheme(raw: unknown): Theme {
  if (!raw || typeof raw !== 'object') return DEFAULT_THEME;
  const t = raw as Partial<Theme>;
  return {
    title: t.title ?? DEFAULT_THEME.title,
    apps: { ...DEFAULT_THEME.apps, ...(t.apps ?? {}) },
    spriteSheet: t.spriteSheet ?? '',
    sprites: t.sprites ?? {},
  };
}

export function spriteIcon(theme: Theme, name: string,
                           doc: Document = document): HTMLElement {
  const node = doc.createElement('span');
  node.className = `sprite sprite-${name}`;
  const rect = theme.sprites[name];
  if (rect && theme.spriteSheet) {
    node.style.backgroundImage = `url(${theme.spriteSheet})`;
    node.style.backgroundPosition = `-${rect.x}px -${rect.y}px`;
    node.style.width = `${rect.w}px`;
    node.style.height = `${rect.h}px`;
    node.style.display = 'inline-block';
  }
  return node;
}
