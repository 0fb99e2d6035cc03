"""Drug repositioning pipeline scripts."""
