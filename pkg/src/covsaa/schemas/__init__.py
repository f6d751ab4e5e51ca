"""
@File       : __init__.py
@Description: 

@Time       : 2026/01/07 10:30
@Author     : hcy18
"""
